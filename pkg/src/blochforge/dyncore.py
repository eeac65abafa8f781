"""Two-level domain types, Pauli algebra and the state <-> Bloch mapping.

All rates are in Hz. Hamiltonians carry the 2*pi factor, so their entries
are angular frequencies (rad/s).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
IDENTITY = np.eye(2, dtype=np.complex128)


class DegenerateStateError(ValueError):
    """Raised when a zero-power state is mapped onto the Bloch sphere."""


@dataclass(frozen=True)
class StateVector:
    c0: complex
    c1: complex

    @classmethod
    def from_array(cls, arr) -> StateVector:
        return cls(complex(arr[0]), complex(arr[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.c0, self.c1], dtype=np.complex128)

    @property
    def power(self) -> float:
        return abs(self.c0) ** 2 + abs(self.c1) ** 2

    @property
    def population0(self) -> float:
        """Normalised population of mode |0>."""
        p = self.power
        if not p > 0:
            raise DegenerateStateError("state has zero power")
        return abs(self.c0) ** 2 / p


GROUND = StateVector(1 + 0j, 0j)
EXCITED = StateVector(0j, 1 + 0j)


@dataclass(frozen=True)
class DriveParams:
    """Piecewise-constant drive: detuning, coupling and the two loss rates (Hz)."""

    delta: float = 0.0
    kappa: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0

    def __post_init__(self):
        for name in ("delta", "kappa", "gamma1", "gamma2"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa!r}")

    @property
    def mean_loss(self) -> float:
        return 0.5 * (self.gamma1 + self.gamma2)

    @property
    def half_loss_difference(self) -> float:
        return 0.5 * (self.gamma1 - self.gamma2)

    @property
    def is_lossless(self) -> bool:
        return self.gamma1 == 0.0 and self.gamma2 == 0.0


@dataclass(frozen=True)
class Operator2:
    m00: complex
    m01: complex
    m10: complex
    m11: complex

    @classmethod
    def from_matrix(cls, m) -> Operator2:
        m = np.asarray(m)
        return cls(complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.m00, self.m01], [self.m10, self.m11]], dtype=np.complex128)

    def __matmul__(self, other):
        if isinstance(other, Operator2):
            return Operator2.from_matrix(self.matrix @ other.matrix)
        if isinstance(other, StateVector):
            return StateVector(
                self.m00 * other.c0 + self.m01 * other.c1,
                self.m10 * other.c0 + self.m11 * other.c1,
            )
        return NotImplemented

    @property
    def trace(self) -> complex:
        return self.m00 + self.m11

    @property
    def det(self) -> complex:
        return self.m00 * self.m11 - self.m01 * self.m10

    def is_hermitian(self, tol: float = 0.0) -> bool:
        return (
            abs(self.m01 - self.m10.conjugate()) <= tol
            and abs(self.m00.imag) <= tol
            and abs(self.m11.imag) <= tol
        )


@dataclass(frozen=True)
class BlochPoint:
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def angles(self) -> tuple[float, float]:
        """Polar and azimuthal angle; the azimuth is pinned to 0 at the poles."""
        theta = math.acos(min(1.0, max(-1.0, self.z)))
        if self.x == 0.0 and self.y == 0.0:
            return theta, 0.0
        return theta, math.atan2(self.y, self.x)


def hamiltonian_from_params(p: DriveParams) -> Operator2:
    return Operator2(
        TWO_PI * complex(p.delta / 2.0, -p.gamma1),
        complex(TWO_PI * p.kappa),
        complex(TWO_PI * p.kappa),
        TWO_PI * complex(-p.delta / 2.0, -p.gamma2),
    )


def pauli_decompose(h: Operator2) -> tuple[complex, complex, complex, complex]:
    """Coefficients ``(a0, ax, ay, az)`` with ``h = a0 I + ax sx + ay sy + az sz``."""
    a0 = (h.m00 + h.m11) / 2
    az = (h.m00 - h.m11) / 2
    ax = (h.m01 + h.m10) / 2
    ay = 1j * (h.m01 - h.m10) / 2
    return a0, ax, ay, az


def pauli_compose(a0, ax, ay, az) -> Operator2:
    return Operator2(a0 + az, ax - 1j * ay, ax + 1j * ay, a0 - az)


def bloch_arrays(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised Bloch mapping of an ``(n, 2)`` amplitude array.

    Returns the ``(n, 3)`` unit Bloch vectors and the ``(n,)`` powers.
    """
    c0 = states[..., 0]
    c1 = states[..., 1]
    p0 = c0.real**2 + c0.imag**2
    p1 = c1.real**2 + c1.imag**2
    power = p0 + p1
    if np.any(~(power > 0)):
        raise DegenerateStateError("state has zero power")
    cross = np.conj(c0) * c1
    xyz = np.stack([2 * cross.real, 2 * cross.imag, p0 - p1], axis=-1) / power[..., None]
    # the formulas are exact only up to rounding; keep the vector on the sphere
    xyz /= np.linalg.norm(xyz, axis=-1, keepdims=True)
    return xyz, power


def bloch_from_state(psi: StateVector) -> BlochPoint:
    xyz, _ = bloch_arrays(psi.as_array()[None, :])
    return BlochPoint(*map(float, xyz[0]))


def state_from_angles(theta: float, phi: float) -> StateVector:
    return StateVector(
        complex(math.cos(theta / 2)),
        complex(math.cos(phi), math.sin(phi)) * math.sin(theta / 2),
    )


def parse_initial_state(text: str) -> StateVector:
    """``"0"``, ``"1"`` or ``"theta,phi"`` in degrees."""
    text = text.strip()
    if text == "0":
        return GROUND
    if text == "1":
        return EXCITED
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"initial state must be 0, 1 or theta,phi in degrees, got {text!r}")
    theta, phi = (math.radians(float(v)) for v in parts)
    return state_from_angles(theta, phi)
