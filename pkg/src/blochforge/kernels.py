"""Hot numeric kernels.

Every kernel exists twice: a scalar-loop version compiled with numba and a
vectorised numpy version. The public names at the bottom of the module are
bound to one or the other depending on ``BLOCHFORGE_NUMBA``; both families
stay importable (``JIT`` / ``NUMPY``) for cross-checks and benchmarks.

Operators are passed as Pauli coefficient rows ``(a0, bx, by, bz)`` so that
``h = a0 I + bx sx + by sy + bz sz``.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit
from ._accel import prange as _prange

# |mu dt| below this switches the propagator to its Taylor series
SERIES_THRESHOLD = 1e-6


# ---------------------------------------------------------------- numba path


@njit
def _cos_sinc(mu2, dt):
    # cos(mu dt) and sin(mu dt)/mu, both even in mu, from mu**2
    x2 = mu2 * dt * dt
    if abs(x2) < SERIES_THRESHOLD * SERIES_THRESHOLD:
        c = 1.0 - x2 / 2.0 + x2 * x2 / 24.0 - x2 * x2 * x2 / 720.0
        s = dt * (1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0)
        return c, s
    mu = np.sqrt(mu2)
    return np.cos(mu * dt), np.sin(mu * dt) / mu


@njit
def _prop_scalar(a0, bx, by, bz, dt):
    c, s = _cos_sinc(bx * bx + by * by + bz * bz, dt)
    ph = np.exp(-1j * a0 * dt)
    u00 = ph * (c - 1j * s * bz)
    u11 = ph * (c + 1j * s * bz)
    u01 = ph * (-1j * s * (bx - 1j * by))
    u10 = ph * (-1j * s * (bx + 1j * by))
    return u00, u01, u10, u11


@njit
def _propagators_jit(coef, dts):
    n = dts.shape[0]
    out = np.empty((n, 2, 2), dtype=np.complex128)
    for k in range(n):
        u00, u01, u10, u11 = _prop_scalar(coef[k, 0], coef[k, 1], coef[k, 2], coef[k, 3], dts[k])
        out[k, 0, 0] = u00
        out[k, 0, 1] = u01
        out[k, 1, 0] = u10
        out[k, 1, 1] = u11
    return out


@njit
def _sample_states_jit(coef, psi0, taus):
    n = taus.shape[0]
    out = np.empty((n, 2), dtype=np.complex128)
    for k in range(n):
        u00, u01, u10, u11 = _prop_scalar(coef[0], coef[1], coef[2], coef[3], taus[k])
        out[k, 0] = u00 * psi0[0] + u01 * psi0[1]
        out[k, 1] = u10 * psi0[0] + u11 * psi0[1]
    return out


@njit
def _rk4_jit(hs, durations, psi0, dt):
    p0 = psi0[0]
    p1 = psi0[1]
    for m in range(durations.shape[0]):
        dur = durations[m]
        if dur <= 0.0:
            continue
        nsteps = int(math.ceil(dur / dt - 1e-9))
        if nsteps < 1:
            nsteps = 1
        h = dur / nsteps
        a00 = -1j * hs[m, 0, 0]
        a01 = -1j * hs[m, 0, 1]
        a10 = -1j * hs[m, 1, 0]
        a11 = -1j * hs[m, 1, 1]
        for _ in range(nsteps):
            k10 = a00 * p0 + a01 * p1
            k11 = a10 * p0 + a11 * p1
            q0 = p0 + 0.5 * h * k10
            q1 = p1 + 0.5 * h * k11
            k20 = a00 * q0 + a01 * q1
            k21 = a10 * q0 + a11 * q1
            q0 = p0 + 0.5 * h * k20
            q1 = p1 + 0.5 * h * k21
            k30 = a00 * q0 + a01 * q1
            k31 = a10 * q0 + a11 * q1
            q0 = p0 + h * k30
            q1 = p1 + h * k31
            k40 = a00 * q0 + a01 * q1
            k41 = a10 * q0 + a11 * q1
            p0 = p0 + h / 6.0 * (k10 + 2.0 * k20 + 2.0 * k30 + k40)
            p1 = p1 + h / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
    out = np.empty(2, dtype=np.complex128)
    out[0] = p0
    out[1] = p1
    return out


@njit(parallel=True)
def _ramsey_ensemble_jit(pulse, delta, taus, offsets):
    n = taus.shape[0]
    m = offsets.shape[0]
    out = np.empty(n, dtype=np.float64)
    # first pulse acting on |0>
    a0 = pulse[0, 0]
    a1 = pulse[1, 0]
    for k in _prange(n):
        acc = 0.0
        for j in range(m):
            half = math.pi * (delta + offsets[j]) * taus[k]
            b0 = a0 * np.exp(-1j * half)
            b1 = a1 * np.exp(1j * half)
            c0 = pulse[0, 0] * b0 + pulse[0, 1] * b1
            c1 = pulse[1, 0] * b0 + pulse[1, 1] * b1
            p0 = c0.real * c0.real + c0.imag * c0.imag
            p1 = c1.real * c1.real + c1.imag * c1.imag
            acc += p0 / (p0 + p1)
        out[k] = acc / m
    return out


@njit
def _pt_half_trace_scalar(kappa, dgamma, period, alpha):
    two_pi = 2.0 * math.pi
    mu2 = two_pi * two_pi * (kappa * kappa - dgamma * dgamma)
    t1 = alpha * period
    t2 = (1.0 - alpha) * period
    c1, s1 = _cos_sinc(mu2 + 0j, t1)
    c2, s2 = _cos_sinc(mu2 + 0j, t2)
    dot = two_pi * two_pi * (kappa * kappa + dgamma * dgamma)
    return (c1 * c2 - s1 * s2 * dot).real


@njit(parallel=True)
def _pt_half_trace_grid_jit(kappa, dgammas, periods, alpha):
    out = np.empty((dgammas.shape[0], periods.shape[0]), dtype=np.float64)
    for i in _prange(dgammas.shape[0]):
        for j in range(periods.shape[0]):
            out[i, j] = _pt_half_trace_scalar(kappa, dgammas[i], periods[j], alpha)
    return out


# ---------------------------------------------------------------- numpy path


def _cos_sinc_np(mu2, dt):
    mu2 = np.asarray(mu2, dtype=np.complex128)
    dt = np.asarray(dt, dtype=np.float64)
    x2 = mu2 * dt * dt
    small = np.abs(x2) < SERIES_THRESHOLD * SERIES_THRESHOLD
    mu = np.sqrt(np.where(small, 1.0, mu2))
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(small, 1.0 - x2 / 2.0 + x2**2 / 24.0 - x2**3 / 720.0, np.cos(mu * dt))
        s = np.where(
            small,
            dt * (1.0 - x2 / 6.0 + x2**2 / 120.0 - x2**3 / 5040.0),
            np.sin(mu * dt) / mu,
        )
    return c, s


def _propagators_np(coef, dts):
    coef = np.asarray(coef, dtype=np.complex128)
    dts = np.asarray(dts, dtype=np.float64)
    a0, bx, by, bz = coef.T
    c, s = _cos_sinc_np(bx * bx + by * by + bz * bz, dts)
    ph = np.exp(-1j * a0 * dts)
    out = np.empty((dts.shape[0], 2, 2), dtype=np.complex128)
    out[:, 0, 0] = ph * (c - 1j * s * bz)
    out[:, 1, 1] = ph * (c + 1j * s * bz)
    out[:, 0, 1] = ph * (-1j * s * (bx - 1j * by))
    out[:, 1, 0] = ph * (-1j * s * (bx + 1j * by))
    return out


def _sample_states_np(coef, psi0, taus):
    taus = np.asarray(taus, dtype=np.float64)
    coef = np.broadcast_to(np.asarray(coef, dtype=np.complex128), (taus.shape[0], 4))
    return _propagators_np(coef, taus) @ np.asarray(psi0, dtype=np.complex128)


def _rk4_np(hs, durations, psi0, dt):
    # H is constant per segment, so one RK4 step is the fixed linear map
    # M = 1 + A + A^2/2 + A^3/6 + A^4/24 with A = -i H h
    psi = np.asarray(psi0, dtype=np.complex128).copy()
    eye = np.eye(2, dtype=np.complex128)
    for hm, dur in zip(hs, durations):
        if dur <= 0.0:
            continue
        nsteps = max(1, int(math.ceil(dur / dt - 1e-9)))
        a = -1j * np.asarray(hm) * (dur / nsteps)
        a2 = a @ a
        step = eye + a + a2 / 2.0 + a2 @ a / 6.0 + a2 @ a2 / 24.0
        psi = np.linalg.matrix_power(step, nsteps) @ psi
    return psi


def _ramsey_ensemble_np(pulse, delta, taus, offsets):
    pulse = np.asarray(pulse, dtype=np.complex128)
    half = np.pi * (delta + np.asarray(offsets)[None, :]) * np.asarray(taus)[:, None]
    b0 = pulse[0, 0] * np.exp(-1j * half)
    b1 = pulse[1, 0] * np.exp(1j * half)
    c0 = pulse[0, 0] * b0 + pulse[0, 1] * b1
    c1 = pulse[1, 0] * b0 + pulse[1, 1] * b1
    p0 = np.abs(c0) ** 2
    p1 = np.abs(c1) ** 2
    return np.mean(p0 / (p0 + p1), axis=1)


def _pt_half_trace_grid_np(kappa, dgammas, periods, alpha):
    dg = np.asarray(dgammas, dtype=np.float64)[:, None]
    T = np.asarray(periods, dtype=np.float64)[None, :]
    two_pi = 2.0 * np.pi
    mu2 = np.broadcast_to(two_pi**2 * (kappa**2 - dg**2), (dg.shape[0], T.shape[1]))
    c1, s1 = _cos_sinc_np(mu2, np.broadcast_to(alpha * T, mu2.shape))
    c2, s2 = _cos_sinc_np(mu2, np.broadcast_to((1.0 - alpha) * T, mu2.shape))
    dot = two_pi**2 * (kappa**2 + dg**2)
    return (c1 * c2 - s1 * s2 * dot).real


# ---------------------------------------------------------------- dispatch


class _Family:
    def __init__(self, **fns):
        self.__dict__.update(fns)


JIT = _Family(
    propagators=_propagators_jit,
    sample_states=_sample_states_jit,
    rk4=_rk4_jit,
    ramsey_ensemble=_ramsey_ensemble_jit,
    pt_half_trace_grid=_pt_half_trace_grid_jit,
)

NUMPY = _Family(
    propagators=_propagators_np,
    sample_states=_sample_states_np,
    rk4=_rk4_np,
    ramsey_ensemble=_ramsey_ensemble_np,
    pt_half_trace_grid=_pt_half_trace_grid_np,
)

ACTIVE = JIT if USE_NUMBA else NUMPY

propagators = ACTIVE.propagators
sample_states = ACTIVE.sample_states
rk4 = ACTIVE.rk4
ramsey_ensemble = ACTIVE.ramsey_ensemble
pt_half_trace_grid = ACTIVE.pt_half_trace_grid
