"""Least-squares fits for decay constants.

Gauss-Newton with Levenberg damping and analytic Jacobians. Both models
are fitted in rate form (``1/tconst``) so that an undamped signal sits at a
finite point of parameter space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_ITER = 200
STEP_TOL = 1e-10


@dataclass(frozen=True)
class FitResult:
    params: dict
    residual_rms: float
    converged: bool
    iterations: int
    model: str = field(default="", compare=False)

    def __getitem__(self, key):
        return self.params[key]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": dict(self.params),
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def levenberg_marquardt(residual, jacobian, p0, max_iter=MAX_ITER, step_tol=STEP_TOL):
    """Minimise ``sum(residual(p)**2)``.

    Returns ``(p, converged, iterations)``. Convergence means a relative
    parameter step below ``step_tol``.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _lm(residual, jacobian, p0, max_iter, step_tol)


def _lm(residual, jacobian, p0, max_iter, step_tol):
    p = np.asarray(p0, dtype=float).copy()
    r = residual(p)
    cost = r @ r
    lam = 1e-3
    for it in range(1, max_iter + 1):
        J = jacobian(p)
        A = J.T @ J
        g = J.T @ r
        diag = np.diag(A).copy()
        diag[diag == 0] = 1.0
        try:
            step = -np.linalg.solve(A + lam * np.diag(diag), g)
        except np.linalg.LinAlgError:
            lam *= 10
            continue
        if not np.all(np.isfinite(step)):
            return p, False, it
        trial = p + step
        r_trial = residual(trial)
        cost_trial = r_trial @ r_trial
        small = np.linalg.norm(step) <= step_tol * (np.linalg.norm(p) + step_tol)
        if np.isfinite(cost_trial) and cost_trial <= cost:
            p, r, cost = trial, r_trial, cost_trial
            lam = max(lam / 3.0, 1e-12)
        else:
            lam *= 4.0
        if small:
            return p, True, it
        if lam > 1e20:
            return p, False, it
    return p, False, max_iter


def _xy(samples, y=None):
    if y is None:
        arr = np.asarray(samples, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("samples must be a sequence of (t, y) pairs")
        return arr[:, 0].copy(), arr[:, 1].copy()
    return np.asarray(samples, dtype=float).ravel(), np.asarray(y, dtype=float).ravel()


def fit_exponential(samples, y=None) -> FitResult:
    """Fit ``y = amplitude * exp(-t / tconst)``.

    Accepts ``(t, y)`` pairs or two arrays.
    """
    t, y = _xy(samples, y)
    if t.size < 4:
        raise ValueError("fit_exponential needs at least 4 samples")
    if t.size != y.size or not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise ValueError("samples must be finite and paired")
    span = float(t.max() - t.min())
    if not span > 0:
        raise ValueError("samples must span a non-zero time interval")

    if np.all(y > 0):
        slope, intercept = np.polyfit(t, np.log(y), 1)
        p0 = [math.exp(intercept), -slope]
    else:
        # log-linear start unavailable; start from the data scale
        p0 = [float(np.max(np.abs(y))) or 1.0, 1.0 / span]

    def residual(p):
        return p[0] * np.exp(-p[1] * t) - y

    def jacobian(p):
        e = np.exp(-p[1] * t)
        return np.column_stack([e, -p[0] * t * e])

    p, converged, iters = levenberg_marquardt(residual, jacobian, p0)
    amplitude, rate = float(p[0]), float(p[1])
    # a decay slower than the data can resolve is not identifiable
    if not rate * span > 1e-9:
        converged = False
    tconst = 1.0 / rate if rate > 0 else math.inf
    rms = float(np.sqrt(np.mean(residual(p) ** 2)))
    return FitResult({"amplitude": amplitude, "tconst": tconst}, rms, converged and math.isfinite(rms), iters, "exponential")


def _cos_model_linear(tau, y, freq, rate):
    # offset and amplitude are linear once freq and rate are fixed
    basis = np.column_stack([np.ones_like(tau), -np.exp(-rate * tau) * np.cos(2 * np.pi * freq * tau)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    r = basis @ coef - y
    return coef, float(r @ r)


def fit_damped_cosine(samples, y=None, n_starts: int = 16) -> FitResult:
    """Fit ``P = offset - amplitude * exp(-tau / t2star) * cos(2 pi freq tau)``.

    Starting frequencies are the ``n_starts`` best local minima of a linear
    least-squares scan over a fine frequency grid up to Nyquist.
    """
    tau, P = _xy(samples, y)
    if tau.size < 12:
        raise ValueError("fit_damped_cosine needs at least 12 samples")
    order = np.argsort(tau)
    tau, P = tau[order], P[order]
    span = float(tau[-1] - tau[0])
    if not span > 0:
        raise ValueError("samples must span a non-zero interval")
    nyquist = 0.5 * (tau.size - 1) / span
    rate0 = 1.0 / span

    grid = np.arange(0.5 / span, nyquist, 0.05 / span)
    scores = np.array([_cos_model_linear(tau, P, f, rate0)[1] for f in grid])
    interior = np.nonzero((scores[1:-1] <= scores[:-2]) & (scores[1:-1] <= scores[2:]))[0] + 1
    candidates = interior if interior.size else np.arange(grid.size)
    starts = grid[candidates[np.argsort(scores[candidates])[:n_starts]]]

    def residual(p):
        return p[0] - p[1] * np.exp(-p[2] * tau) * np.cos(2 * np.pi * p[3] * tau) - P

    def jacobian(p):
        e = np.exp(-p[2] * tau)
        c = np.cos(2 * np.pi * p[3] * tau)
        s = np.sin(2 * np.pi * p[3] * tau)
        return np.column_stack(
            [np.ones_like(tau), -e * c, p[1] * tau * e * c, p[1] * e * s * 2 * np.pi * tau]
        )

    best = None
    total_iters = 0
    for f0 in starts:
        (off, amp), _ = _cos_model_linear(tau, P, f0, rate0)
        p, converged, iters = levenberg_marquardt(residual, jacobian, [off, amp, rate0, f0])
        total_iters += iters
        with np.errstate(over="ignore", invalid="ignore"):
            r = residual(p)
            cost = float(r @ r)
        # frequencies above Nyquist alias onto the same samples
        if abs(p[3]) > nyquist:
            continue
        if np.isfinite(cost) and (best is None or cost < best[0]):
            best = (cost, p, converged)
    if best is None:
        return FitResult(
            {"t2star": math.nan, "freq": math.nan, "amplitude": math.nan, "offset": math.nan},
            math.inf, False, total_iters, "damped_cosine",
        )
    cost, p, converged = best
    offset, amplitude, rate, freq = map(float, p)
    freq = abs(freq)
    if freq * span < 1.0:
        raise ValueError(
            f"samples span {span:.3g} s, less than one period of the fitted {freq:.3g} Hz oscillation"
        )
    t2star = 1.0 / rate if rate > 0 else math.inf
    rms = math.sqrt(cost / tau.size)
    return FitResult(
        {"t2star": t2star, "freq": freq, "amplitude": amplitude, "offset": offset},
        rms, converged, total_iters, "damped_cosine",
    )
