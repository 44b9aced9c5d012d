import numpy as np
import pytest

from qrcsl import _accel
from qrcsl.free_rates import TwoPacketState
from qrcsl.trajectories import Grid1D, build_collapse_operators, packet_state

BACKENDS = ["python"] + (["cython"] if _accel.BACKEND == "cython" else [])


def test_backend_selected():
    assert _accel.BACKEND in ("python", "cython")
    with pytest.raises(ValueError):
        _accel.backend_module("fortran")


@pytest.mark.skipif(_accel.BACKEND != "cython", reason="extension not built")
def test_smear_integrand_parity():
    z = np.random.default_rng(0).standard_normal((5000, 8))
    seps = np.array([0.0, 1.0, 4.0, 10.0])
    a = _accel.backend_module("python").smear_integrand(z, seps, 10.0, 0.15)
    b = _accel.backend_module("cython").smear_integrand(z, seps, 10.0, 0.15)
    assert np.allclose(a, b, rtol=1e-13, atol=0)


@pytest.mark.skipif(_accel.BACKEND != "cython", reason="extension not built")
@pytest.mark.parametrize("raw", [True, False])
def test_trajectory_chunk_parity(raw):
    g = Grid1D(32, 0.5, 0.05)
    ops = build_collapse_operators(g)
    psi0 = packet_state(g, TwoPacketState(6.0, 0.7, 0.4)).amplitudes
    noise = np.random.default_rng(1).standard_normal((7, 12, 32))
    out = [_accel.backend_module(b).csl_trajectory_chunk(psi0, ops.rows, g.dx, g.dt, noise, 3, raw, g.x < 0)
           for b in ("python", "cython")]
    assert np.allclose(out[0][0], out[1][0], rtol=1e-12, atol=1e-14)
    assert np.allclose(out[0][1], out[1][1], rtol=1e-11, atol=1e-12)


def test_pure_python_forced(monkeypatch):
    import importlib
    monkeypatch.setenv("QRCSL_PURE_PYTHON", "1")
    mod = importlib.reload(_accel)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("QRCSL_PURE_PYTHON")
        importlib.reload(_accel)
