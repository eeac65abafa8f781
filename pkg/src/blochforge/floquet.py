"""Floquet analysis of the periodically switched gain/loss dimer.

Within each period ``T`` the drive spends ``alpha*T`` in

    H1 = 2pi [[+i dg, k], [k, -i dg]] - 2pi i g I

and the rest in ``H2`` (the same with ``dg -> -dg``). The PT part
(``g`` dropped) has traceless generators, so the monodromy has unit
determinant and its spectrum is fixed by ``tr(U)/2`` alone.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .dyncore import TWO_PI, DriveParams, Operator2, StateVector
from .propagator import (
    DEFAULT_SAMPLE_DT,
    PeriodicBlock,
    Schedule,
    Segment,
    Trajectory,
    evolve,
    segment_propagator,
)

SCAN_STEPS = 2000
STABLE_CLAMP = 1e-9
UNIMODULAR_TOL = 1e-9


class SpectralError(ValueError):
    """Monodromy is singular, so quasi-energies are undefined."""


@dataclass(frozen=True)
class FloquetParams:
    kappa: float
    dgamma: float
    period: float
    gamma: float = 0.0
    alpha: float = 0.5

    def __post_init__(self):
        for name in ("kappa", "dgamma", "period", "gamma", "alpha"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if not self.period > 0:
            raise ValueError("period must be > 0")
        if not 0 < self.alpha < 1:
            raise ValueError(
                f"alpha must lie in (0, 1), got {self.alpha!r}; "
                "use the static evaluators for the unmodulated system"
            )

    @property
    def drive_params(self) -> tuple[DriveParams, DriveParams]:
        """The two halves of a period as loss-rate drives (``-2pi i gamma_j`` diagonal)."""
        first = DriveParams(0.0, self.kappa, self.gamma - self.dgamma, self.gamma + self.dgamma)
        second = DriveParams(0.0, self.kappa, self.gamma + self.dgamma, self.gamma - self.dgamma)
        return first, second


@dataclass(frozen=True)
class QuasiEnergyPair:
    eps1: complex
    eps2: complex
    period: float

    @property
    def max_imag(self) -> float:
        return max(abs(self.eps1.imag), abs(self.eps2.imag))


@dataclass(frozen=True)
class PhaseDiagramGrid:
    dgamma_axis: np.ndarray
    period_axis: np.ndarray
    values: np.ndarray
    kappa: float
    alpha: float


def pt_hamiltonians(kappa: float, dgamma: float) -> tuple[Operator2, Operator2]:
    k = TWO_PI * kappa
    g = TWO_PI * dgamma
    h1 = Operator2(1j * g, k, k, -1j * g)
    h2 = Operator2(-1j * g, k, k, 1j * g)
    return h1, h2


def monodromy(p: FloquetParams) -> Operator2:
    """One-period propagator of the PT part, ``U2 @ U1`` (H1 acts first)."""
    h1, h2 = pt_hamiltonians(p.kappa, p.dgamma)
    u1 = segment_propagator(h1, p.alpha * p.period)
    u2 = segment_propagator(h2, (1.0 - p.alpha) * p.period)
    return u2 @ u1


def half_trace(kappa: float, dgamma: float, period: float, alpha: float) -> float:
    """Closed-form ``tr(U)/2`` of the PT monodromy, valid on both sides of the EP."""
    grid = kernels.pt_half_trace_grid(
        float(kappa), np.array([float(dgamma)]), np.array([float(period)]), float(alpha)
    )
    return float(grid[0, 0])


def _wrap(re: float, period: float) -> float:
    edge = math.pi / period
    re = math.remainder(re, 2 * edge)
    if re <= -edge:
        re += 2 * edge
    return re


def quasi_energies(u: Operator2, period: float) -> QuasiEnergyPair:
    """``eps = i ln(lambda) / T`` per eigenvalue, real part wrapped to (-pi/T, pi/T]."""
    if not period > 0:
        raise ValueError("period must be > 0")
    half = u.trace / 2
    det = u.det
    # a product of traceless-generator exponentials has det exactly 1; the
    # computed det drifts by ~eps*|U|^2, so snap it back when within that
    if abs(det - 1) <= UNIMODULAR_TOL * max(1.0, abs(half) ** 2):
        det = 1.0
    root = cmath.sqrt(half * half - det)
    # take the larger root directly and the other from the determinant, so
    # the small eigenvalue does not suffer cancellation at strong growth
    big = half + root if abs(half + root) >= abs(half - root) else half - root
    if big == 0:
        raise SpectralError("monodromy is the zero matrix")
    lams = (big, det / big)
    eps = []
    for lam in lams:
        if lam == 0 or not cmath.isfinite(lam):
            raise SpectralError(f"monodromy has eigenvalue {lam!r}")
        log = cmath.log(lam)
        eps.append(complex(_wrap(-log.imag / period, period), log.real / period))
    return QuasiEnergyPair(eps[0], eps[1], period)


def _growth_from_half_trace(c: np.ndarray, period) -> np.ndarray:
    # det U = 1: lambda = c +- sqrt(c^2 - 1); |Im eps| = arccosh|c| / T off the unit circle
    c = np.abs(np.asarray(c, dtype=float))
    with np.errstate(invalid="ignore"):
        vals = np.where(c > 1.0, np.arccosh(np.maximum(c, 1.0)), 0.0) / period
    return np.where(vals < STABLE_CLAMP, 0.0, vals)


def static_max_imag(kappa: float, dgamma) -> np.ndarray:
    """Largest |Im eps| of the unmodulated PT Hamiltonian: ``2pi sqrt(dg^2 - k^2)`` past the EP."""
    dg = np.asarray(dgamma, dtype=float)
    return TWO_PI * np.sqrt(np.maximum(dg**2 - kappa**2, 0.0))


def _is_static(alpha: Optional[float]) -> bool:
    return alpha is None or alpha <= 0.0 or alpha >= 1.0


def ep_threshold(kappa: float, period: float, alpha: Optional[float] = 0.5) -> Optional[float]:
    """Smallest ``dgamma`` in (0, kappa) at which the quasi-energies coalesce.

    Brackets ``|tr(U)/2| - 1`` with a ``kappa/2000`` scan, then bisects.
    Returns ``None`` when the drive stays stable for every ``dgamma < kappa``.
    ``alpha`` of 0, 1 or ``None`` selects the unmodulated system, whose EP
    sits at ``dgamma = kappa``.
    """
    if not kappa > 0:
        raise ValueError("kappa must be > 0")
    if _is_static(alpha):
        return float(kappa)
    if not period > 0:
        raise ValueError("period must be > 0")

    grid = np.arange(SCAN_STEPS) * (kappa / SCAN_STEPS)
    c = kernels.pt_half_trace_grid(float(kappa), grid, np.array([float(period)]), float(alpha))[:, 0]
    excess = np.abs(c) - 1.0
    hits = np.nonzero(excess[1:] > 0)[0]
    if hits.size == 0:
        return None
    hi = grid[hits[0] + 1]
    lo = grid[hits[0]]
    f = lambda d: abs(half_trace(kappa, d, period, alpha)) - 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return float(0.5 * (lo + hi))


def closed_form_residual(kappa: float, dgamma: float, period: float) -> float:
    """Residual of ``cos^2(2pi sqrt(k^2 - dg^2) T / 2) = dg^2 / k^2`` (duty cycle 1/2)."""
    omega = TWO_PI * math.sqrt(kappa**2 - dgamma**2)
    return math.cos(omega * period / 2) ** 2 - dgamma**2 / kappa**2


def _check_axis(axis, name) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d sequence")
    if np.any(np.diff(axis) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    return axis


def phase_diagram(
    kappa: float,
    dgamma_axis: Sequence[float],
    period_axis: Sequence[float],
    alpha: Optional[float] = 0.5,
) -> PhaseDiagramGrid:
    """``max|Im eps|`` over a (dgamma, period) grid; zero marks the PT-exact region."""
    dg = _check_axis(dgamma_axis, "dgamma_axis")
    T = _check_axis(period_axis, "period_axis")
    if np.any(T <= 0):
        raise ValueError("periods must be > 0")
    if _is_static(alpha):
        vals = np.broadcast_to(static_max_imag(kappa, dg)[:, None], (dg.size, T.size)).copy()
        vals[vals < STABLE_CLAMP] = 0.0
        return PhaseDiagramGrid(dg, T, vals, float(kappa), 0.0)
    c = kernels.pt_half_trace_grid(float(kappa), dg, T, float(alpha))
    return PhaseDiagramGrid(dg, T, _growth_from_half_trace(c, T[None, :]), float(kappa), float(alpha))


def floquet_schedule(p: FloquetParams, n_periods: int) -> Schedule:
    if int(n_periods) != n_periods or n_periods < 1:
        raise ValueError("n_periods must be a positive integer")
    first, second = p.drive_params
    body = (Segment(first, p.alpha * p.period), Segment(second, (1.0 - p.alpha) * p.period))
    return Schedule.of(PeriodicBlock(body, int(n_periods)))


def floquet_evolve(
    p: FloquetParams,
    n_periods: int,
    psi0: StateVector,
    sample_dt: float = DEFAULT_SAMPLE_DT,
) -> Trajectory:
    """Evolve under the full drive, passive loss included."""
    return evolve(floquet_schedule(p, n_periods), psi0, sample_dt)


def stroboscopic_powers(traj: Trajectory, period: float) -> np.ndarray:
    """Powers at ``t = 0, T, 2T, ...`` picked out of a trajectory."""
    n = int(round(traj.t[-1] / period))
    targets = np.arange(n + 1) * period
    idx = np.searchsorted(traj.t, targets - 1e-9 * period)
    idx = np.minimum(idx, len(traj) - 1)
    if np.any(np.abs(traj.t[idx] - targets) > 1e-9 * max(period, traj.t[-1])):
        raise ValueError("trajectory is missing stroboscopic samples")
    return traj.power[idx]
