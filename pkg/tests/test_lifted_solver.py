import math

import numpy as np
import pytest

from lifted_mfvi import potentials as P
from lifted_mfvi.errors import ConvergenceError, DomainError, ParamError
from lifted_mfvi.oracle import GaussianTarget, gaussian_mfvi
from lifted_mfvi.lifted_solver import (CaviConfig, GridDensity, SolverConfig, cavi_solve, elbo,
                                eval_first_variation, eval_functional, solve_lifted)
from lifted_mfvi.transport import MCQuadrature, QuantileGrid, TransportMap, lp_distance

P2 = np.array([[2.0, 1.0], [1.0, 2.0]])


def oracle_map(grid, P_, mean):
    g = gaussian_mfvi(GaussianTarget(mean, P_))
    return TransportMap.affine(grid, g.mean, g.std)


def test_gaussian_2d_recovery_and_band():
    p = P.gaussian(P2, [0.5, -0.5])
    sol = solve_lifted(p)
    assert sol.residual <= 1e-8
    assert lp_distance(sol.map, oracle_map(sol.map.grid, P2, [0.5, -0.5])) <= 1e-2
    s = sol.map.slopes()
    assert s.min() >= 1 / math.sqrt(p.beta) - 1e-12 and s.max() <= 1 / math.sqrt(p.alpha) + 1e-12


def test_history_never_increases():
    p = P.logistic_regression(np.array([[1.0, 0.5], [-0.3, 1.0], [0.7, -0.2]]),
                              np.array([1.0, -1.0, 1.0]), 0.5)
    sol = solve_lifted(p)
    h = np.array(sol.history)
    assert np.all(np.diff(h) <= 0)


def test_optimal_elbo_gaussian_closed_form():
    # max ELBO for exp(-V), V = (x-m)^T P (x-m)/2 is (d/2) log 2 pi - (1/2) sum log P_ii
    Pm = np.array([[3.0, 1.0, 0.2], [1.0, 2.0, 0.4], [0.2, 0.4, 1.0]])
    sol = solve_lifted(P.gaussian(Pm))
    exact = 1.5 * math.log(2 * math.pi) - 0.5 * np.log(np.diag(Pm)).sum()
    assert sol.elbo == pytest.approx(exact, abs=5e-3)


def test_separable_target_exact_marginal():
    p = P.separable(P.softplus_1d(), 2)
    sol = solve_lifted(p)
    one = solve_lifted(P.softplus_1d())
    assert np.allclose(sol.map.values[0], one.map.values[0], atol=5e-3)


def test_deterministic_repeat_and_hash():
    p = P.gaussian(P2)
    a, b = solve_lifted(p, SolverConfig(seed=3)), solve_lifted(p, SolverConfig(seed=3))
    assert np.array_equal(a.map.values, b.map.values)
    assert a.config_hash == b.config_hash != SolverConfig(seed=4).hash()


def test_iteration_cap_raises_convergence_error():
    p = P.logistic_regression(np.array([[2.0, 0.5], [-0.3, 1.0]]), np.array([1.0, -1.0]), 0.3)
    with pytest.raises(ConvergenceError) as ei:
        solve_lifted(p, SolverConfig(max_iters=1))
    assert ei.value.iterations == 1 and ei.value.residual > 1e-8


def test_config_validation():
    with pytest.raises(ParamError):
        SolverConfig(grid_m=1)
    with pytest.raises(ParamError):
        SolverConfig(tol=0.0)
    with pytest.raises(ParamError):
        MCQuadrature(0, 100, 2, scheme="sobol")


def test_warm_start_on_other_grid():
    p = P.gaussian(P2)
    coarse = solve_lifted(p, SolverConfig(grid_m=16)).map
    sol = solve_lifted(p, SolverConfig(grid_m=64), init=coarse)
    assert sol.map.grid.m == 64 and sol.residual <= 1e-8


def test_functional_and_first_variation_at_optimum():
    p = P.gaussian(P2)
    q = MCQuadrature(0, 20000, 2)
    sol = solve_lifted(p, q=q)
    assert eval_functional(sol.map, p, q) == pytest.approx(sol.functional_value, abs=1e-12)
    assert elbo(sol.map, p, q) == pytest.approx(sol.elbo, abs=1e-12)
    G = eval_first_variation(sol.map, p, q)
    assert G.shape == (2, 64)
    # interior optimum of the discrete problem: stationary up to the solver tolerance
    assert np.abs(G).max() <= 1e-6


def test_entropy_domain_error():
    p = P.gaussian(P2)
    g = QuantileGrid.gaussian(8)
    T = TransportMap(g, np.vstack([g.nodes, np.zeros(8)]), check=False)
    with pytest.raises(DomainError):
        eval_functional(T, p, MCQuadrature(0, 100, 2))


def test_cavi_gaussian_variances():
    res = cavi_solve(P.gaussian(P2))
    assert [d.var() for d in res.densities] == pytest.approx([0.5, 0.5], abs=1e-4)
    assert res.change <= 1e-7
    sol = solve_lifted(P.gaussian(P2))
    assert lp_distance(res.map, sol.map) <= 5e-3


def test_cavi_separable_converges_after_one_update():
    res = cavi_solve(P.separable(P.softplus_1d(), 2))
    # the second sweep only confirms the first
    assert res.changes[1] <= 1e-12
    one = solve_lifted(P.softplus_1d())
    assert lp_distance(TransportMap(res.map.grid, res.map.values[:1]), one.map) <= 5e-3


def test_cavi_sweep_cap():
    with pytest.raises(ConvergenceError):
        cavi_solve(P.gaussian(P2), CaviConfig(max_sweeps=1))


def test_grid_density_quantile_roundtrip():
    x = np.linspace(-6, 6, 401)
    g = GridDensity(x, np.exp(-0.5 * x ** 2))
    v = np.array([0.1, 0.5, 0.9])
    assert np.allclose(g.quantile(v), [-1.2815515655, 0.0, 1.2815515655], atol=2e-3)
    assert g.mass() == pytest.approx(1.0)
