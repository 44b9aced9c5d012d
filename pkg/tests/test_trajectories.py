import math

import numpy as np
import pytest

from qrcsl.free_rates import TwoPacketState
from qrcsl.numerics import DomainError
from qrcsl.trajectories import (
    EnsembleConfig,
    Grid1D,
    IntegrationError,
    StabilityError,
    StateVector,
    build_collapse_operators,
    coherence,
    csl_closed_form,
    master_evolve,
    off_diagonal_decay_rate,
    packet_state,
    run_ensemble,
    step_trajectory,
)

GRID = Grid1D(64, 0.3, 0.05)


def _rho(psi):
    return np.outer(psi, psi.conj())


def test_grid_validation():
    with pytest.raises(DomainError):
        Grid1D(6, 0.1, 0.01)
    with pytest.raises(DomainError):
        Grid1D(16, 0.0, 0.01)
    with pytest.raises(StabilityError):
        Grid1D(16, 0.3, 0.2)
    g = Grid1D(16, 0.5, 0.01)
    assert g.x[g.n_points // 2] == 0.0 and g.length == 8.0
    F = g.fourier_matrix()
    assert np.allclose(F @ F.conj().T, np.eye(16), atol=1e-13)


def test_csl_operators_diagonal_positive():
    ops = build_collapse_operators(GRID)
    mats = ops.position_matrices()
    off = mats - np.einsum("ijj->ij", mats)[:, :, None] * np.eye(GRID.n_points)
    assert np.max(np.abs(off)) == 0.0
    assert np.all(ops.rows > 0)
    assert ops.rows[5, 5] == pytest.approx(np.pi**-0.25)
    assert ops.max_rate() == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("mu", [1.0, 1e3])
def test_operators_hermitian(mu):
    g = Grid1D(32, 0.4, 0.02)
    ops = build_collapse_operators(g, "QRCSL", mu=mu, p_max=6.0)
    mats = ops.position_matrices()
    assert np.max(np.abs(mats - np.conj(np.transpose(mats, (0, 2, 1))))) < 1e-14


def test_qrcsl_converges_to_projected_csl():
    g = Grid1D(64, 0.2, 0.02)
    csl = build_collapse_operators(g, "CSL", p_max=10.0).position_matrices()
    devs = [np.max(np.abs(build_collapse_operators(g, "QRCSL", mu=mu, p_max=10.0).position_matrices() - csl))
            for mu in (10.0, 100.0, 1000.0)]
    assert devs[2] < 1e-4
    assert devs[0] > devs[1] > devs[2]


def test_qrcsl_small_mass_not_diagonal():
    g = Grid1D(32, 0.4, 0.02)
    mats = build_collapse_operators(g, "QRCSL", mu=1.0, p_max=6.0).position_matrices()
    diag = np.einsum("ijj->ij", mats)
    off = mats - diag[:, :, None] * np.eye(32)
    assert np.max(np.abs(off)) > 1e-2


def test_operator_errors():
    with pytest.raises(DomainError):
        build_collapse_operators(GRID, "QRCSL")
    with pytest.raises(DomainError):
        build_collapse_operators(GRID, "GRW")
    with pytest.raises(DomainError):
        build_collapse_operators(GRID, "QRCSL", mu=1.0, p_max=0.01)
    with pytest.raises(DomainError):
        build_collapse_operators(GRID, "QRCSL", mu=1.0, p_max=20.0)
    with pytest.raises(StabilityError):
        master_evolve(np.eye(64) / 64, build_collapse_operators(GRID), 0.5, dt=0.25)


def test_master_diagonal_state_is_stationary():
    ops = build_collapse_operators(GRID)
    rho0 = np.diag(np.linspace(1, 2, GRID.n_points)).astype(complex)
    rho0 /= np.trace(rho0)
    assert np.array_equal(master_evolve(rho0, ops, 1.0), rho0)


def test_master_matches_csl_closed_form():
    ops = build_collapse_operators(GRID)
    psi = packet_state(GRID, TwoPacketState(4.0, 1.0)).amplitudes
    rho0 = _rho(psi)
    got = master_evolve(rho0, ops, 1.0)
    # independent evaluation of the pair rates
    g = ops.rows
    rates = 0.5 * GRID.dx * np.sum((g[:, :, None] - g[:, None, :]) ** 2, axis=0)
    expected = rho0 * np.exp(-rates)
    big = np.abs(expected) > 1e-6 * np.max(np.abs(expected))
    assert np.max(np.abs(got[big] / expected[big] - 1)) < 1e-6
    assert np.allclose(csl_closed_form(rho0, ops, 1.0), expected, rtol=1e-12, atol=0)


def test_master_trace_preserved_over_many_steps():
    g = Grid1D(32, 0.4, 0.02)
    ops = build_collapse_operators(g, "QRCSL", mu=1.0, p_max=6.0)
    psi = ops.project(packet_state(g, TwoPacketState(4.0, 0.7))).normalized()
    rho = master_evolve(_rho(psi), ops, 1000 * g.dt)
    assert abs(np.trace(rho).real - 1.0) < 1e-8


def test_master_rejects_bad_input():
    ops = build_collapse_operators(GRID)
    rho0 = np.eye(GRID.n_points, dtype=complex) / GRID.n_points
    with pytest.raises(DomainError):
        master_evolve(rho0, ops, 0.123)
    bad = rho0.copy()
    bad[0, 0] = -0.5
    with pytest.raises(IntegrationError):
        master_evolve(bad, ops, 0.05)


def test_decay_rates_qrcsl_limit_and_small_mass():
    g = Grid1D(128, 0.2, 0.01)
    state = TwoPacketState(10.0, 0.5)
    csl = off_diagonal_decay_rate(build_collapse_operators(g, "CSL", p_max=10.0), state)
    heavy = off_diagonal_decay_rate(build_collapse_operators(g, "QRCSL", mu=1e3, p_max=10.0), state)
    light = off_diagonal_decay_rate(build_collapse_operators(g, "QRCSL", mu=1.0, p_max=10.0), state)
    assert heavy == pytest.approx(csl, rel=1e-2)
    assert light < 0.9 * csl


def test_step_lambda_zero_is_identity():
    ops = build_collapse_operators(GRID)
    s = StateVector(packet_state(GRID, TwoPacketState(4.0, 0.5)).amplitudes)
    out = step_trajectory(s, ops, np.ones(GRID.n_points), lam=0.0)
    assert np.array_equal(out.amplitudes, s.amplitudes) and out.log_scale == s.log_scale


def test_step_eigenstate_with_matching_noise_is_unchanged():
    ops = build_collapse_operators(GRID)
    j = 10
    amps = np.zeros(GRID.n_points, dtype=complex)
    amps[j] = 1.0
    w = 2.0 * ops.rows[:, j]  # 2 lambda times the eigenvalues of every A_i
    out = step_trajectory(StateVector(amps), ops, w)
    assert out.log_norm2 == pytest.approx(0.0, abs=1e-12)
    assert out.amplitudes[j] == pytest.approx(1.0)


def test_step_qrcsl_matches_csl_at_large_mass():
    g = Grid1D(32, 0.4, 0.02)
    s = StateVector(g.fourier_matrix().conj().T @ (g.fourier_matrix() @ packet_state(g, TwoPacketState(3.0, 0.8)).amplitudes))
    csl = build_collapse_operators(g, "CSL", p_max=6.0)
    q = build_collapse_operators(g, "QRCSL", mu=1e4, p_max=6.0)
    s = csl.project(s)
    w = np.random.default_rng(0).normal(size=32) * 10
    a, b = step_trajectory(s, csl, w), step_trajectory(s, q, w)
    assert a.log_norm2 == pytest.approx(b.log_norm2, abs=1e-6)


def test_state_vector_validation():
    with pytest.raises(DomainError):
        StateVector(np.zeros(8))
    with pytest.raises(DomainError):
        StateVector(np.array([np.nan, 1.0]))


def test_single_packet_outcomes_and_martingale():
    ops = build_collapse_operators(GRID)
    stats = run_ensemble(TwoPacketState(10.0, 0.5, 1.0), ops,
                         EnsembleConfig(n_traj=200, t_final=1.0, record_every=5))
    assert stats.left_fraction == 1.0
    assert stats.martingale_ok()
    assert not stats.flagged


def test_born_rule_half():
    ops = build_collapse_operators(GRID)
    stats = run_ensemble(TwoPacketState(10.0, 0.5, 0.5), ops,
                         EnsembleConfig(n_traj=1000, t_final=10.0, record_every=20))
    assert abs(stats.left_fraction - 0.5) < 3 * math.sqrt(0.25 / 1000)


def test_ensemble_deterministic_and_parallel_invariant():
    ops = build_collapse_operators(GRID)
    st = TwoPacketState(10.0, 0.5, 0.3)
    cfg = dict(n_traj=150, t_final=0.5, chunk_size=32)
    a = run_ensemble(st, ops, EnsembleConfig(workers=1, **cfg))
    b = run_ensemble(st, ops, EnsembleConfig(workers=4, **cfg))
    assert np.array_equal(a.rho, b.rho) and a.left_fraction == b.left_fraction
    c = run_ensemble(st, ops, EnsembleConfig(seed=2, **cfg))
    assert not np.array_equal(a.rho, c.rho)


def test_raw_scheme_martingale_short_time():
    ops = build_collapse_operators(GRID)
    stats = run_ensemble(TwoPacketState(10.0, 0.5), ops,
                         EnsembleConfig(n_traj=2000, t_final=0.2, scheme="raw", record_every=2))
    assert stats.martingale_ok()


def test_ensemble_matches_master():
    ops = build_collapse_operators(GRID)
    st = TwoPacketState(10.0, 0.5)
    stats = run_ensemble(st, ops, EnsembleConfig(n_traj=2000, t_final=0.5))
    ref = master_evolve(_rho(packet_state(GRID, st).amplitudes), ops, 0.5)
    assert np.linalg.norm(stats.rho - ref, 2) < 0.03
    assert coherence(stats.rho, GRID, st) == pytest.approx(coherence(ref, GRID, st), abs=0.03)


def test_qrcsl_ensemble_martingale():
    g = Grid1D(32, 0.5, 0.05)
    ops = build_collapse_operators(g, "QRCSL", mu=1.0, p_max=5.0)
    stats = run_ensemble(TwoPacketState(6.0, 0.7), ops, EnsembleConfig(n_traj=200, t_final=0.5, record_every=5))
    assert stats.martingale_ok()


def test_ensemble_config_validation():
    with pytest.raises(DomainError):
        EnsembleConfig(scheme="boiled")
    with pytest.raises(DomainError):
        run_ensemble(TwoPacketState(1.0, 0.5), build_collapse_operators(GRID), EnsembleConfig(t_final=0.12))
