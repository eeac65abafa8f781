import os
import subprocess
import sys

import numpy as np
import pytest

from blochforge import kernels

import oracles

rng = np.random.default_rng(123)


def random_coef(n):
    coef = rng.normal(size=(n, 4)) * 40 + 1j * rng.normal(size=(n, 4)) * 5
    coef[::7, 1:] = 0  # pure phase rows
    coef[3::11, 1:] *= 1e-9  # series branch
    return coef


def test_propagators_parity_and_oracle():
    coef = random_coef(200)
    dts = rng.uniform(0, 0.05, 200)
    a = kernels.JIT.propagators(coef, dts)
    b = kernels.NUMPY.propagators(coef, dts)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    for k in (0, 3, 50, 199):
        h = coef[k, 0] * oracles.I2 + coef[k, 1] * oracles.SX + coef[k, 2] * oracles.SY + coef[k, 3] * oracles.SZ
        ref = oracles.expm(-1j * h * dts[k])
        np.testing.assert_allclose(a[k], ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())


def test_sample_states_parity():
    coef = random_coef(1)[0]
    psi = np.array([0.3 + 0.1j, -0.7j])
    taus = np.linspace(0, 0.1, 101)
    np.testing.assert_allclose(
        kernels.JIT.sample_states(coef, psi, taus), kernels.NUMPY.sample_states(coef, psi, taus), rtol=1e-13, atol=1e-14
    )


def test_rk4_parity():
    hs = np.array([oracles.hamiltonian(3, 5, 0.2, -0.1), oracles.hamiltonian(-8, 1)])
    durs = np.array([0.013, 0.02])
    psi = np.array([1.0 + 0j, 0j])
    a = kernels.JIT.rk4(hs, durs, psi, 1e-5)
    b = kernels.NUMPY.rk4(hs, durs, psi, 1e-5)
    np.testing.assert_allclose(a, b, rtol=1e-11)
    np.testing.assert_allclose(a, oracles.rk4(list(zip(hs, durs)), psi, 1e-5), rtol=1e-11)


def test_ramsey_ensemble_parity():
    pulse = (np.eye(2) - 1j * oracles.SX) / np.sqrt(2)
    taus = np.linspace(0, 0.3, 31)
    offsets = rng.standard_cauchy(300)
    a = kernels.JIT.ramsey_ensemble(pulse, 10.0, taus, offsets)
    b = kernels.NUMPY.ramsey_ensemble(pulse, 10.0, taus, offsets)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_half_trace_grid_parity():
    dg = np.linspace(0, 12, 41)
    Ts = np.linspace(0.01, 0.2, 17)
    a = kernels.JIT.pt_half_trace_grid(8.5, dg, Ts, 0.3)
    b = kernels.NUMPY.pt_half_trace_grid(8.5, dg, Ts, 0.3)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    ref = np.trace(oracles.pt_monodromy(8.5, dg[13], Ts[5], 0.3)).real / 2
    assert a[13, 5] == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("flag,expected", [("0", "NUMPY"), ("off", "NUMPY"), ("1", "JIT")])
def test_env_flag_selects_family(flag, expected):
    code = "from blochforge import kernels; print('JIT' if kernels.ACTIVE is kernels.JIT else 'NUMPY')"
    env = dict(os.environ, BLOCHFORGE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected


def test_thread_cap(monkeypatch):
    from blochforge import _accel

    monkeypatch.setenv("BLOCHFORGE_THREADS", "2")
    assert _accel.thread_cap() == 2
    monkeypatch.setenv("BLOCHFORGE_THREADS", "bogus")
    assert _accel.thread_cap() is None
    monkeypatch.delenv("BLOCHFORGE_THREADS")
    assert _accel.thread_cap() is None
