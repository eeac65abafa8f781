"""Independent reference implementations used only by the tests.

Nothing here imports blochforge: matrices are built from the textbook
formulas, exponentials come from scaling-and-squaring Taylor series, and
time evolution from a plain RK4 loop.
"""
import math

import numpy as np

TWO_PI = 2 * math.pi
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def hamiltonian(delta=0.0, kappa=0.0, g1=0.0, g2=0.0):
    return TWO_PI * np.array(
        [[delta / 2 - 1j * g1, kappa], [kappa, -delta / 2 - 1j * g2]], dtype=complex
    )


def expm(a, terms=30):
    """exp(a) by scaling and squaring a truncated Taylor series."""
    a = np.asarray(a, dtype=complex)
    norm = np.abs(a).sum(axis=1).max()
    k = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    b = a / 2**k
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for n in range(1, terms):
        term = term @ b / n
        out = out + term
    for _ in range(k):
        out = out @ out
    return out


def propagate(segments, psi0):
    """segments: list of (H, duration)."""
    psi = np.asarray(psi0, dtype=complex)
    for h, dur in segments:
        psi = expm(-1j * h * dur) @ psi
    return psi


def rk4(segments, psi0, dt):
    psi = np.asarray(psi0, dtype=complex)
    for h, dur in segments:
        n = int(math.ceil(dur / dt - 1e-9)) if dur > 0 else 0
        if n == 0:
            continue
        step = dur / n
        for _ in range(n):
            k1 = -1j * h @ psi
            k2 = -1j * h @ (psi + 0.5 * step * k1)
            k3 = -1j * h @ (psi + 0.5 * step * k2)
            k4 = -1j * h @ (psi + step * k3)
            psi = psi + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


def rabi_p0(delta, kappa, t):
    a = (math.pi * delta) ** 2
    b = (TWO_PI * kappa) ** 2
    if a + b == 0:
        return np.ones_like(np.asarray(t, dtype=float))
    return 1 - b / (a + b) * np.sin(np.sqrt(a + b) * np.asarray(t)) ** 2


def bloch(psi):
    c0, c1 = psi
    p = abs(c0) ** 2 + abs(c1) ** 2
    return np.array([2 * (np.conj(c0) * c1).real, 2 * (np.conj(c0) * c1).imag, abs(c0) ** 2 - abs(c1) ** 2]) / p


def pt_monodromy(kappa, dgamma, period, alpha=0.5):
    h1 = TWO_PI * np.array([[1j * dgamma, kappa], [kappa, -1j * dgamma]])
    h2 = TWO_PI * np.array([[-1j * dgamma, kappa], [kappa, 1j * dgamma]])
    return expm(-1j * h2 * (1 - alpha) * period) @ expm(-1j * h1 * alpha * period)


def pt_eigenvalues(kappa, dgamma, period, alpha=0.5):
    return np.linalg.eigvals(pt_monodromy(kappa, dgamma, period, alpha))


def threshold_condition(kappa, dgamma, period):
    """cos^2(2 pi sqrt(k^2 - dg^2) T / 2) - dg^2 / k^2."""
    w = TWO_PI * math.sqrt(kappa**2 - dgamma**2)
    return math.cos(w * period / 2) ** 2 - dgamma**2 / kappa**2


def lorentzian_envelope(hwhm, tau):
    return np.exp(-TWO_PI * hwhm * np.asarray(tau))
