"""Closed-form propagation through piecewise-constant schedules."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

from . import kernels
from .dyncore import (
    TWO_PI,
    BlochPoint,
    DriveParams,
    Operator2,
    StateVector,
    bloch_arrays,
    hamiltonian_from_params,
    pauli_decompose,
)

DEFAULT_SAMPLE_DT = 1e-4


@dataclass(frozen=True)
class Segment:
    params: DriveParams
    duration: float

    def __post_init__(self):
        if not math.isfinite(self.duration) or self.duration < 0:
            raise ValueError(f"segment duration must be finite and >= 0, got {self.duration!r}")

    @property
    def hamiltonian(self) -> Operator2:
        return hamiltonian_from_params(self.params)


@dataclass(frozen=True)
class PeriodicBlock:
    body: tuple[Segment, ...]
    repeats: int

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))
        if not self.body:
            raise ValueError("periodic block needs at least one segment")
        if int(self.repeats) != self.repeats or self.repeats < 1:
            raise ValueError(f"repeats must be a positive integer, got {self.repeats!r}")

    @property
    def period(self) -> float:
        return sum(seg.duration for seg in self.body)


Item = Union[Segment, PeriodicBlock]


@dataclass(frozen=True)
class Schedule:
    items: tuple[Item, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if not self.items:
            raise ValueError("schedule must contain at least one item")

    @classmethod
    def of(cls, *items: Item) -> Schedule:
        return cls(items)

    def __add__(self, other: Schedule) -> Schedule:
        return Schedule(self.items + other.items)

    def segments(self) -> Iterator[Segment]:
        """Flattened segments in time order, periodic bodies expanded."""
        for item in self.items:
            if isinstance(item, PeriodicBlock):
                for _ in range(item.repeats):
                    yield from item.body
            else:
                yield item

    @property
    def duration(self) -> float:
        total = 0.0
        for item in self.items:
            if isinstance(item, PeriodicBlock):
                total += item.repeats * item.period
            else:
                total += item.duration
        return total


@dataclass(frozen=True)
class Trajectory:
    """Sampled evolution. Arrays share their first axis."""

    t: np.ndarray
    states: np.ndarray
    bloch: np.ndarray
    power: np.ndarray
    boundaries: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def final(self) -> StateVector:
        return StateVector.from_array(self.states[-1])

    @property
    def population0(self) -> np.ndarray:
        return np.abs(self.states[:, 0]) ** 2 / self.power

    def sample(self, i: int) -> tuple[float, StateVector, BlochPoint, float]:
        return (
            float(self.t[i]),
            StateVector.from_array(self.states[i]),
            BlochPoint(*map(float, self.bloch[i])),
            float(self.power[i]),
        )


def _coefficients(h: Operator2) -> np.ndarray:
    return np.array(pauli_decompose(h), dtype=np.complex128)


def segment_propagator(h: Operator2, dt: float) -> Operator2:
    """``exp(-i h dt)`` from the Pauli closed form."""
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt!r}")
    u = kernels.propagators(_coefficients(h)[None, :], np.array([float(dt)]))
    return Operator2.from_matrix(u[0])


def schedule_propagator(s: Schedule) -> Operator2:
    """Ordered product of segment propagators, later segments on the left."""
    u = np.eye(2, dtype=np.complex128)
    for seg in s.segments():
        u = segment_propagator(seg.hamiltonian, seg.duration).matrix @ u
    return Operator2.from_matrix(u)


def _as_array(psi) -> np.ndarray:
    if isinstance(psi, StateVector):
        return psi.as_array()
    return np.asarray(psi, dtype=np.complex128)


def evolve(s: Schedule, psi0: StateVector, sample_dt: float = DEFAULT_SAMPLE_DT) -> Trajectory:
    """Sample the evolution on a global ``sample_dt`` grid plus all segment boundaries.

    Within a segment every sample is propagated directly from the segment's
    initial state, so sampling does not accumulate error.
    """
    if not sample_dt > 0:
        raise ValueError(f"sample_dt must be > 0, got {sample_dt!r}")
    psi = _as_array(psi0)
    if not (abs(psi[0]) ** 2 + abs(psi[1]) ** 2) > 0:
        raise ValueError("initial state has zero power")
    if not isinstance(s, Schedule) or not s.items:
        raise ValueError("empty schedule")

    tol = 1e-6 * sample_dt
    times = [np.array([0.0])]
    chunks = [psi[None, :]]
    boundaries = [0.0]
    t0 = 0.0
    for seg in s.segments():
        if seg.duration == 0.0:
            continue
        t1 = t0 + seg.duration
        k_lo = math.floor(t0 / sample_dt) + 1
        k_hi = math.ceil(t1 / sample_dt) - 1
        grid = np.arange(k_lo, k_hi + 1, dtype=np.float64) * sample_dt
        grid = grid[(grid > t0 + tol) & (grid < t1 - tol)]
        offsets = np.append(grid - t0, seg.duration)
        sampled = kernels.sample_states(_coefficients(seg.hamiltonian), psi, offsets)
        times.append(np.append(grid, t1))
        chunks.append(sampled)
        psi = sampled[-1].copy()
        boundaries.append(t1)
        t0 = t1

    t = np.concatenate(times)
    states = np.concatenate(chunks)
    bloch, power = bloch_arrays(states)
    return Trajectory(t, states, bloch, power, np.array(boundaries))


def final_state(s: Schedule, psi0: StateVector) -> StateVector:
    """Final state only, skipping trajectory sampling."""
    psi = _as_array(psi0)
    for seg in s.segments():
        if seg.duration == 0.0:
            continue
        psi = kernels.sample_states(_coefficients(seg.hamiltonian), psi, np.array([seg.duration]))[0]
    return StateVector.from_array(psi)


def reference_integrate(s: Schedule, psi0: StateVector, dt: float) -> StateVector:
    """Fixed-step RK4 integration of ``i dpsi/dt = H psi``.

    Independent of the closed-form propagator; used as its oracle.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    segs = [seg for seg in s.segments() if seg.duration > 0]
    if not segs:
        return StateVector.from_array(_as_array(psi0))
    hs = np.array([seg.hamiltonian.matrix for seg in segs])
    for h in hs:
        if np.linalg.norm(h, 2) * dt >= 0.1:
            raise ValueError(
                f"step too large: |H| dt = {np.linalg.norm(h, 2) * dt:.3g} >= 0.1; reduce dt"
            )
    durations = np.array([seg.duration for seg in segs])
    return StateVector.from_array(kernels.rk4(hs, durations, _as_array(psi0), float(dt)))


def rabi_population(delta: float, kappa: float, t):
    """Closed-form population of |0> under a constant lossless drive, starting in |0>."""
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa!r}")
    a = (math.pi * delta) ** 2
    b = (TWO_PI * kappa) ** 2
    if a + b == 0:
        return np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else 1.0
    contrast = b / (a + b)
    return 1.0 - contrast * np.sin(math.sqrt(a + b) * np.asarray(t, dtype=float)) ** 2


def constant_drive_states(params: DriveParams, psi0, times: Sequence[float]) -> np.ndarray:
    """States at ``times`` under one constant drive, each propagated from ``psi0``."""
    h = hamiltonian_from_params(params)
    return kernels.sample_states(_coefficients(h), _as_array(psi0), np.asarray(times, dtype=float))
