"""Experiment generators: Rabi scans, Ramsey fringes, spin echo and T1 decay."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .dyncore import GROUND, TWO_PI, DriveParams, hamiltonian_from_params
from .propagator import (
    DEFAULT_SAMPLE_DT,
    Schedule,
    Segment,
    constant_drive_states,
    evolve,
    final_state,
    segment_propagator,
)

LORENTZIAN_CLIP = 50.0  # draws are clamped to |offset| <= LORENTZIAN_CLIP * hwhm

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ScanResult:
    row_name: str
    row_axis: np.ndarray
    col_name: str
    col_axis: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"  # none | lorentzian_detuning
    hwhm: float = 0.0
    ensemble_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "lorentzian_detuning"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not (math.isfinite(self.hwhm) and self.hwhm >= 0):
            raise ValueError("hwhm must be finite and >= 0")
        if int(self.ensemble_size) != self.ensemble_size or self.ensemble_size < 1:
            raise ValueError("ensemble_size must be a positive integer")

    @classmethod
    def lorentzian(cls, t2star: float, ensemble_size: int, seed: int = 0) -> NoiseModel:
        """Quasi-static detuning noise whose fringe envelope is ``exp(-tau / t2star)``."""
        if not t2star > 0:
            raise ValueError("t2star must be > 0")
        return cls("lorentzian_detuning", 1.0 / (TWO_PI * t2star), ensemble_size, seed)


def _axis(values, name) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _pop0(states: np.ndarray) -> np.ndarray:
    p0 = np.abs(states[..., 0]) ** 2
    p1 = np.abs(states[..., 1]) ** 2
    return p0 / (p0 + p1)


# ---------------------------------------------------------------- Rabi


def rabi_scan(kappa: float, deltas: Sequence[float], times: Sequence[float]) -> ScanResult:
    """Population of |0> under constant drive, rows over detuning, columns over time."""
    if not kappa > 0:
        raise ValueError("kappa must be > 0")
    deltas = _axis(deltas, "deltas")
    times = _axis(times, "times")
    if np.any(times < 0):
        raise ValueError("times must be >= 0")
    values = np.empty((deltas.size, times.size))
    for i, delta in enumerate(deltas):
        values[i] = _pop0(constant_drive_states(DriveParams(delta, kappa), GROUND.as_array(), times))
    return ScanResult("delta_hz", deltas, "t_s", times, values)


# ---------------------------------------------------------------- Ramsey


def x_pulse(kappa: float, angle: float, delta: float = 0.0) -> Segment:
    """Resonant x rotation by ``angle``: duration ``angle / (4 pi kappa)``."""
    if not kappa > 0:
        raise ValueError("kappa must be > 0")
    return Segment(DriveParams(delta, kappa), angle / (2 * TWO_PI * kappa))


def free_precession(delta: float, duration: float) -> Segment:
    return Segment(DriveParams(delta, 0.0), duration)


def ramsey_sequence(kappa: float, delta: float, tau: float) -> Schedule:
    if not tau >= 0:
        raise ValueError("tau must be >= 0")
    half = x_pulse(kappa, math.pi / 2)
    return Schedule.of(half, free_precession(delta, tau), half)


def _splitmix64(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def lorentzian_offsets(seed: int, n: int, hwhm: float) -> np.ndarray:
    """Detuning draws for ensemble members ``0..n-1``.

    Member ``m`` gets the key ``splitmix64(seed) XOR m``; hashing that key
    once more with SplitMix64 and keeping the top 53 bits gives ``u`` in
    [0, 1), and the draw is ``hwhm * tan(pi * (u - 1/2))`` clamped to
    ``LORENTZIAN_CLIP * hwhm``. Draws depend only on (seed, m).
    """
    # hashing the seed first keeps nearby seeds from permuting one key set
    base = _splitmix64(np.array([seed & _MASK64], dtype=np.uint64))[0]
    z = _splitmix64(base ^ np.arange(n, dtype=np.uint64))
    u = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
    draws = hwhm * np.tan(np.pi * (u - 0.5))
    return np.clip(draws, -LORENTZIAN_CLIP * hwhm, LORENTZIAN_CLIP * hwhm)


def ramsey_scan(
    kappa: float,
    deltas: Sequence[float],
    taus: Sequence[float],
    noise: NoiseModel = NoiseModel(),
) -> ScanResult:
    """Ramsey fringes, rows over detuning, columns over free-precession time.

    With Lorentzian noise every ensemble member carries one static detuning
    offset, applied during the free precession only; the pulses stay ideal.
    """
    deltas = _axis(deltas, "deltas")
    taus = _axis(taus, "taus")
    if np.any(taus < 0):
        raise ValueError("taus must be >= 0")
    values = np.empty((deltas.size, taus.size))
    if noise.kind == "none" or noise.hwhm == 0.0:
        for i, delta in enumerate(deltas):
            for j, tau in enumerate(taus):
                values[i, j] = final_state(ramsey_sequence(kappa, delta, tau), GROUND).population0
    else:
        offsets = lorentzian_offsets(noise.seed, noise.ensemble_size, noise.hwhm)
        half = x_pulse(kappa, math.pi / 2)
        pulse = segment_propagator(hamiltonian_from_params(half.params), half.duration).matrix
        for i, delta in enumerate(deltas):
            values[i] = kernels.ramsey_ensemble(pulse, float(delta), taus, offsets)
    return ScanResult("delta_hz", deltas, "tau_s", taus, values)


def ideal_ramsey(delta, tau):
    return (1.0 - np.cos(TWO_PI * np.asarray(delta) * np.asarray(tau))) / 2.0


# ---------------------------------------------------------------- echo


def echo_sequence(kappa: float, delta: float, tau: float, final_angle: float = math.pi / 2) -> Schedule:
    if not tau >= 0:
        raise ValueError("tau must be >= 0")
    if not final_angle > 0:
        raise ValueError("final_angle must be > 0")
    wait = free_precession(delta, tau)
    return Schedule.of(
        x_pulse(kappa, math.pi / 2), wait, x_pulse(kappa, math.pi), wait, x_pulse(kappa, final_angle)
    )


def spin_echo(kappa: float, delta: float, tau: float, final_angle: float = math.pi / 2):
    """Echo schedule and the final normalised population of |0>."""
    schedule = echo_sequence(kappa, delta, tau, final_angle)
    return schedule, final_state(schedule, GROUND).population0


# ---------------------------------------------------------------- T1


def gamma_from_t1(t1: float, convention: str = "power-e-fold") -> float:
    """Loss rate for a target T1.

    ``power-e-fold``: T1 is the 1/e time of the power, so gamma = 1/(4 pi T1).
    ``reciprocal``: gamma = 1/T1.
    """
    if not t1 > 0:
        raise ValueError("t1 must be > 0")
    if convention == "power-e-fold":
        return 1.0 / (2 * TWO_PI * t1)
    if convention == "reciprocal":
        return 1.0 / t1
    raise ValueError(f"unknown T1 convention {convention!r}")


def t1_from_gamma(gamma: float) -> float:
    return 1.0 / (2 * TWO_PI * gamma)


def t1_schedule(gamma1: float, duration: float, kappa: float = 10.0) -> Schedule:
    # the pi pulse leaves all power in |1>; both modes get the rate so the
    # decay is the single-mode exponential regardless of residual |0> weight
    return Schedule.of(x_pulse(kappa, math.pi), Segment(DriveParams(0.0, 0.0, gamma1, gamma1), duration))


def t1_experiment(gamma1: float, duration: float, sample_dt: float = DEFAULT_SAMPLE_DT):
    """Lossless pi pulse from |0>, then free decay.

    Returns ``(t, power)`` with ``t = 0`` at the start of the decay.
    """
    if not duration > 0:
        raise ValueError("duration must be > 0")
    if not gamma1 > 0:
        raise ValueError("gamma1 must be > 0 for a finite T1")
    schedule = t1_schedule(gamma1, duration)
    pulse_end = schedule.items[0].duration
    traj = evolve(schedule, GROUND, sample_dt)
    keep = traj.t >= pulse_end - 1e-12
    t = traj.t[keep] - pulse_end
    t[0] = 0.0
    return t, traj.power[keep]


def add_noise(y, level: float, seed: int) -> np.ndarray:
    """Additive Gaussian noise of standard deviation ``level`` (seeded)."""
    rng = np.random.default_rng(seed)
    return np.asarray(y, dtype=float) + level * rng.standard_normal(np.shape(y))

