import numpy as np
import pytest

from graphop_mv.entropy import fit_decay_rate, kappa_threshold, theoretical_rate
from graphop_mv.errors import CFLViolationError, InvalidParameterError, PositivityError
from graphop_mv.graphops import (NetworkSpace, PowerLawParams, constant_graphon, identity_graphop,
                                 norm_infty_to_1, power_law_graphop)
from graphop_mv.entropy import boundedness_constant
from graphop_mv.solver import (DensityField, SolverConfig, make_initial_condition, read_snapshot, run,
                               stationary_residual, steady_state, step, vlasov_field, write_snapshot)
from graphop_mv.torus import TorusGrid, make_cosine_potential, make_kuramoto_potential

L = 2 * np.pi


@pytest.fixture
def setup():
    grid = TorusGrid(L, 1, 64)
    space = NetworkSpace.point()
    return grid, space, identity_graphop(space), make_kuramoto_potential(L)


def test_steady_state(setup):
    grid, space, A, D = setup
    rho = steady_state(grid, space)
    np.testing.assert_allclose(rho.values, 1 / L)
    sq = steady_state(TorusGrid(1.0, 2, 16), NetworkSpace.uniform(3))
    np.testing.assert_allclose(sq.values, 1.0)
    assert np.max(np.abs(stationary_residual(rho, A, D, 3.0))) < 1e-12
    pl = power_law_graphop(PowerLawParams(0.75), 32)
    flat = steady_state(grid, pl.space)
    assert np.max(np.abs(stationary_residual(flat, pl, D, 3.0))) < 1e-12
    assert np.max(np.abs(vlasov_field(flat, pl, D))) < 1e-12


def test_vlasov_field_quadrature_oracle(setup):
    grid, space, A, D = setup
    x = grid.nodes
    rho = DensityField(((1 + 0.2 * np.cos(x)) / L)[None], grid, space)
    V = vlasov_field(rho, A, D, verify=True)
    # O(n^2) direct quadrature of grad D * rho
    oracle = np.array([grid.dx * np.sum(D.gradient(xj - x)[0] * rho.values[0]) for xj in x])
    np.testing.assert_allclose(V[0, 0], oracle, atol=1e-10)
    np.testing.assert_allclose(V[0, 0], 0.1 * np.sin(x), atol=1e-10)


def test_vlasov_field_constant_graphon_rank_one():
    grid = TorusGrid(L, 1, 32)
    space = NetworkSpace(nodes=np.arange(4), weights=[0.1, 0.2, 0.3, 0.4])
    D = make_kuramoto_potential(L)
    A = constant_graphon(0.3, space)
    rho = make_initial_condition("perturbed-uniform", {"eps": 0.4, "modulation": [1.0, -0.5, 0.2, 0.9]},
                                 grid, space)
    V = vlasov_field(rho, A, D, verify=True)
    avg = np.tensordot(space.weights, rho.values, axes=1)
    p1 = NetworkSpace.point()
    V_avg = vlasov_field(DensityField(avg[None], grid, p1), identity_graphop(p1), D)
    for k in range(4):
        np.testing.assert_allclose(V[0, k], 0.3 * V_avg[0, 0], atol=1e-14)


def test_vlasov_field_two_dimensional():
    grid = TorusGrid(L, 2, 16)
    space = NetworkSpace.point()
    D = make_cosine_potential(L, 2)
    X = grid.coords
    rho = DensityField(((1 + 0.2 * np.cos(X[0]) + 0.1 * np.cos(X[1])) / L**2)[None], grid, space)
    V = vlasov_field(rho, identity_graphop(space), D)
    np.testing.assert_allclose(V[0, 0], 0.1 * np.sin(X[0]), atol=1e-12)
    np.testing.assert_allclose(V[1, 0], 0.05 * np.sin(X[1]), atol=1e-12)


def test_heat_flow_is_exact(setup):
    grid, space, A, D = setup
    x = grid.nodes
    vals = (1 + 0.3 * np.cos(x) + 0.2 * np.sin(3 * x)) / L
    rho = DensityField(vals[None], grid, space)
    dt = 0.05
    new = step(rho, SolverConfig(0.0, dt, dt), A, D)
    expected = (1 + 0.3 * np.exp(-dt) * np.cos(x) + 0.2 * np.exp(-9 * dt) * np.sin(3 * x)) / L
    np.testing.assert_allclose(new.values[0], expected, atol=1e-15)
    assert new.t == pytest.approx(dt)


def test_splay_state_is_fixed_point():
    grid = TorusGrid(L, 1, 32)
    D = make_kuramoto_potential(L)
    A = power_law_graphop(PowerLawParams(0.75), 16)
    rho = steady_state(grid, A.space)
    traj = run(rho, SolverConfig(0.4, 0.01, 0.5, cadence=0.1), A, D)
    np.testing.assert_allclose(traj.final.values, 1 / L, atol=1e-15)
    assert np.all(traj.H_hat == 0.0)


def test_kuramoto_entropy_monotone_and_converged():
    grid = TorusGrid(L, 1, 64)
    space = NetworkSpace.point()
    A, D = identity_graphop(space), make_kuramoto_potential(L)
    rho0 = make_initial_condition("perturbed-uniform", {"eps": 0.5}, grid, space)
    coarse = run(rho0, SolverConfig(0.25, 2e-3, 10.0, cadence=0.1), A, D)
    assert np.all(np.diff(coarse.H_hat) < 0)
    fine = run(rho0, SolverConfig(0.25, 5e-4, 10.0, cadence=0.1), A, D)
    np.testing.assert_allclose(coarse.H_hat, fine.H_hat, rtol=1e-5)


def test_run_zero_time(setup):
    grid, space, A, D = setup
    rho0 = make_initial_condition("perturbed-uniform", {"eps": 0.2}, grid, space)
    traj = run(rho0, SolverConfig(0.25, 1e-2, 0.0), A, D)
    assert len(traj.records) == 1 and traj.records[0]["t"] == 0.0
    assert traj.steps == 0


def test_run_lands_on_final_time(setup):
    grid, space, A, D = setup
    rho0 = make_initial_condition("perturbed-uniform", {"eps": 0.2}, grid, space)
    traj = run(rho0, SolverConfig(0.25, 0.03, 0.1, cadence=0.03), A, D)
    assert traj.final.t == pytest.approx(0.1, abs=1e-15)
    assert traj.t[-1] == pytest.approx(0.1, abs=1e-15)


def test_below_threshold_decay_bound(setup):
    grid, space, A, D = setup
    rho0 = make_initial_condition("perturbed-uniform", {"eps": 0.5}, grid, space)
    kappa = 0.4
    rate = theoretical_rate(kappa, 1.0, L, D)
    traj = run(rho0, SolverConfig(kappa, 2e-3, 5.0, cadence=0.1), A, D)
    assert traj.H_hat[-1] < traj.H_hat[0] * np.exp(-rate * 5.0) * 1.1
    assert fit_decay_rate(traj.t, traj.H_hat) >= rate


def test_at_critical_coupling_entropy_persists(setup):
    grid, space, A, D = setup
    rho0 = make_initial_condition("perturbed-uniform", {"eps": 0.1}, grid, space)
    traj = run(rho0, SolverConfig(2.0, 2e-3, 20.0, cadence=1.0), A, D)
    assert traj.H_hat[-1] > 1e-3


def test_positivity_failure_suggests_smaller_step(setup):
    grid, space, A, D = setup
    rho0 = make_initial_condition("von-mises-mixture", {"centers": [0.0], "concentrations": [5.0]}, grid, space)
    with pytest.raises(PositivityError) as err:
        run(rho0, SolverConfig(20.0, 0.05, 0.05, cfl=1e9), A, D)
    assert err.value.suggested_dt == pytest.approx(0.025)


def test_cfl_violation_rejects_step(setup):
    grid, space, A, D = setup
    rho0 = make_initial_condition("von-mises-mixture", {"centers": [0.0], "concentrations": [5.0]}, grid, space)
    before = rho0.values.copy()
    with pytest.raises(CFLViolationError) as err:
        step(rho0, SolverConfig(50.0, 0.5, 0.5), A, D)
    assert 0 < err.value.max_dt < 0.5
    np.testing.assert_array_equal(rho0.values, before)


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        SolverConfig(-1.0, 0.1, 1.0)
    with pytest.raises(InvalidParameterError):
        SolverConfig(1.0, 0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        SolverConfig(1.0, 0.1, 1.0, scheme="euler")


def test_run_rejects_inadmissible_start(setup):
    grid, space, A, D = setup
    bad = DensityField(np.full((1, grid.n), 2 / L), grid, space)
    with pytest.raises(InvalidParameterError):
        run(bad, SolverConfig(0.1, 0.01, 0.1), A, D)


def test_initial_conditions(setup):
    grid, space, A, D = setup
    flat = make_initial_condition("perturbed-uniform", {"eps": 0.0}, grid, space)
    np.testing.assert_allclose(flat.values, 1 / L)
    pert = make_initial_condition("perturbed-uniform", {"eps": 0.1}, grid, space)
    assert abs(pert.masses()[0] - 1) < 1e-12
    vm = make_initial_condition("von-mises-mixture", {"centers": [0.0], "concentrations": [2.0]}, grid, space)
    assert vm.min() > 0
    from graphop_mv.entropy import relative_entropy
    assert np.isfinite(relative_entropy(vm.values[0], grid))
    with pytest.raises(InvalidParameterError):
        make_initial_condition("perturbed-uniform", {"eps": 1.0}, grid, space)
    with pytest.raises(InvalidParameterError):
        make_initial_condition("gaussian-bump", {}, grid, space)
    nodes = NetworkSpace.uniform(5, nodes=np.linspace(0.1, 0.9, 5))
    mod = make_initial_condition("perturbed-uniform", {"eps": 0.5, "modulation": lambda xi: xi}, grid, nodes)
    amp = (mod.values.max(axis=1) - mod.values.min(axis=1)) * L / 2
    np.testing.assert_allclose(amp, 0.5 * np.linspace(0.1, 0.9, 5), rtol=1e-3)


def test_mass_conservation_and_decoupling():
    grid = TorusGrid(L, 1, 32)
    space = NetworkSpace.uniform(4)
    A, D = identity_graphop(space), make_kuramoto_potential(L)
    rho0 = make_initial_condition("von-mises-mixture", {"centers": [0.5, -1.0], "concentrations": [2.0, 1.0]},
                                  grid, space)
    traj = run(rho0, SolverConfig(1.2, 5e-3, 3.0, cadence=0.5), A, D)
    assert traj.column("mass_drift_max").max() <= 1e-9
    assert traj.column("rho_min").min() >= -1e-10
    v = traj.final.values
    assert np.max(np.abs(v - v[0])) <= 1e-12


def test_self_convergence_second_order():
    grid = TorusGrid(L, 1, 32)
    space = NetworkSpace.point()
    A, D = identity_graphop(space), make_kuramoto_potential(L)
    rho0 = make_initial_condition("perturbed-uniform", {"eps": 0.5}, grid, space)
    H = [run(rho0, SolverConfig(1.5, dt, 2.0, cadence=2.0), A, D).H_hat[-1] for dt in (0.04, 0.02, 0.01)]
    ratio = (H[0] - H[1]) / (H[1] - H[2])
    assert 3 <= ratio <= 5


def test_boundedness_along_power_law_trajectory():
    grid = TorusGrid(L, 1, 32)
    D = make_kuramoto_potential(L)
    A = power_law_graphop(PowerLawParams(0.75), 32)
    kappa = 0.3
    assert kappa > kappa_threshold(8.0, L, D)
    rho0 = make_initial_condition("perturbed-uniform", {"eps": 0.5, "modulation": np.linspace(0.5, 1, 32)},
                                  grid, A.space)
    traj = run(rho0, SolverConfig(kappa, 2e-3, 5.0, cadence=0.1), A, D)
    bound = boundedness_constant(kappa, D, norm_infty_to_1(A), L)
    assert np.all(traj.H_hat <= max(traj.H_hat[0], bound))


def test_snapshot_roundtrip(tmp_path):
    grid = TorusGrid(3.0, 2, 8)
    space = NetworkSpace.uniform(3)
    rho = make_initial_condition("perturbed-uniform", {"eps": 0.3}, grid, space)
    rho.t = 1.25
    path = tmp_path / "s.bin"
    write_snapshot(path, rho)
    d, n, count, t, values = read_snapshot(path)
    assert (d, n, count, t) == (2, 8, 3, 1.25)
    np.testing.assert_array_equal(values, rho.values)


def test_snapshot_cadence(setup):
    grid, space, A, D = setup
    rho0 = make_initial_condition("perturbed-uniform", {"eps": 0.3}, grid, space)
    traj = run(rho0, SolverConfig(0.25, 0.01, 1.0, cadence=0.1, snapshot_cadence=0.5), A, D)
    assert [round(s.t, 12) for s in traj.snapshots] == [0.0, 0.5, 1.0]
    assert len(traj.records) == 11
