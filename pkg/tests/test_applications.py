import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma
from scipy.stats import norm

from lifted_mfvi import potentials as P
from lifted_mfvi.applications import (bvm_bound_local, bvm_bound_smooth, bvm_linreg, bvm_report,
                                      bvm_surrogate, contamination_sensitivity, control_potential,
                                      control_value, control_value_stability,
                                      gaussian_log_density, gaussian_mixture_alpha, linear_utility,
                                      linreg_w2_bound, optimal_local_radius, prior_swap_interval,
                                      quadratic_utility, softmin_utility, zero_utility)
from lifted_mfvi.errors import DomainError, InputError, ParamError
from lifted_mfvi.lifted_solver import solve_lifted
from lifted_mfvi.transport import MCQuadrature, map_moments, push_samples, lp_distance


# --- BvM -------------------------------------------------------------------

def test_surrogate_examples():
    s = bvm_surrogate(P.standard_gaussian(3), 10)
    assert np.allclose(s.mean, 0, atol=1e-8) and np.allclose(s.std, 1 / math.sqrt(10))
    s = bvm_surrogate(P.gaussian([[2.0, 1.0], [1.0, 2.0]]), 4)
    assert np.allclose(s.std, 1 / math.sqrt(8))


def test_surrogate_logistic_matches_fd_hessian():
    A = np.array([[1.0, 0.4], [-0.6, 1.0], [0.3, -0.8], [1.2, 0.1]])
    f = P.logistic_regression(A, np.array([1.0, -1.0, 1.0, 1.0]), 0.7)
    n = 25
    s = bvm_surrogate(f, n)
    h = 1e-4
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (P.eval(f, s.mean + e) - 2 * P.eval(f, s.mean) + P.eval(f, s.mean - e)) / h ** 2
        assert 1 / s.std[i] ** 2 == pytest.approx(n * fd, rel=1e-5)


def test_smooth_bound_arithmetic():
    assert bvm_bound_smooth(1.0, 1.0, 4, 100) == 0.4
    assert bvm_bound_smooth(1.0, 1.0, 4, 200) == pytest.approx(0.4 / math.sqrt(2))
    with pytest.raises(ParamError):
        bvm_bound_smooth(0.0, 1.0, 4, 100)


def test_local_bound_double_entry():
    d, n, a, b, ell, tau, s, C = 2, 50, 1.0, 2.0, 0.5, 0.0, 2.0, 1.0
    first = ell ** 2 * (d ** 2 + 2 * d) / (3 * a ** 4 * n ** 2)
    second = (n * b / 2) ** (d / 2) * C * (d + 2) * s ** d / (gamma(d / 2) * a ** 2 * (n * a - tau)) \
        * math.exp(-(n * a - tau) * s ** 2 / 2)
    assert bvm_bound_local(a, b, ell, tau, s, C, d, n) == pytest.approx(math.sqrt(first + second), rel=1e-12)


def test_local_bound_quadratic_limit_and_monotone():
    vals = [bvm_bound_local(1.0, 1.0, 0.0, 0.0, s, 1.0, 3, 20) for s in (0.6, 0.8, 1.2, 2.0)]
    assert all(x > y for x, y in zip(vals, vals[1:]))
    assert bvm_bound_local(1.0, 1.0, 0.0, 0.0, 5.0, 1.0, 3, 20) < 1e-40


def test_local_bound_preconditions():
    with pytest.raises(DomainError):
        bvm_bound_local(1.0, 1.0, 0.1, 0.0, 0.1, 1.0, 2, 10)
    with pytest.raises(DomainError):
        bvm_bound_local(1.0, 1.0, 0.1, 10.0, 3.0, 1.0, 2, 10)


def test_quadratic_target_matches_surrogate():
    Q = np.array([[2.0, 0.6], [0.6, 1.0]])
    r = bvm_report(P.gaussian(Q, [0.2, -0.1]), 30, measure=True)
    assert r.measured_w2 <= 1e-2
    assert np.all(r.D_n >= 30 * r.alpha_n - 1e-9) and np.all(r.D_n <= 30 * r.b_n + 1e-9)


def test_perturbed_quadratic_soundness():
    f = P.perturbed_quadratic(np.array([[2.0, 0.5], [0.5, 1.5]]), [0.3, -0.2], 0.8)
    r = bvm_report(f, 15, ell_n=f.hessian_lipschitz, C=f.hessian_growth_C, measure=True)
    assert r.measured_w2 <= 1.05 * r.bound_smooth
    assert r.measured_w2 <= 1.05 * r.bound_local
    assert r.mean_sq_error <= r.measured_w2 ** 2 * (1 + 1e-9) <= r.bound_local ** 2 * 1.1025
    s = optimal_local_radius(r.alpha_n, r.b_n, f.hessian_lipschitz, 0.0, f.hessian_growth_C, 2, 15)
    assert s > math.sqrt(4 / (15 * r.alpha_n))


def test_bvm_linreg_plug_in_and_rate():
    prior = P.quadratic_1d()
    r = bvm_linreg(np.eye(5), np.zeros(5), 1.0, prior, 100)
    assert r.bound_smooth == pytest.approx(2 * math.sqrt(1 / 40), rel=1e-12)
    r4 = bvm_linreg(np.eye(5), np.zeros(5), 1.0, prior, 400)
    assert r4.bound_smooth == pytest.approx(r.bound_smooth / 2)


def test_bvm_linreg_gaussian_exact():
    A = np.array([[2.0, 0.5, 0.0], [0.5, 1.5, 0.3], [0.0, 0.3, 1.0]])
    r = bvm_linreg(A, [1.0, 0.0, -1.0], 1.0, P.quadratic_1d(), 40, measure=True)
    # Gaussian posterior: the mean-field optimizer of exp(-n V) is exactly the surrogate
    assert r.measured_w2 <= 1e-2


# --- robustness ------------------------------------------------------------

def test_linreg_tau_bound_on_synthetic_data():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((50, 5))
    y = X @ rng.standard_normal(5) + 0.5 * rng.standard_normal(50)
    A, w = X.T @ X / 50, X.T @ y / 50
    prior = P.softplus_1d()
    q = MCQuadrature(0, 20000, 5)
    tau_hat, tau = 1.3, 1.0
    s_hat = solve_lifted(P.linreg_potential(A, w, tau_hat, prior), q=q)
    s = solve_lifted(P.linreg_potential(A, w, tau, prior), q=q)
    bound = linreg_w2_bound(A, w, tau_hat, tau, prior, push_samples(s_hat.map, q))
    assert lp_distance(s_hat.map, s.map) <= bound


def test_prior_swap_examples():
    X = np.random.default_rng(0).standard_normal((500, 4))
    g0 = lambda Z: -Z
    r = prior_swap_interval(1.0, g0, g0, X, 1.0, 1.0)
    assert r.delta == 0.0
    mu = 0.3
    r = prior_swap_interval(1.0, g0, lambda Z: -(Z - mu), X, 0.5, 1.0, statistic=lambda Z: Z[:, 0])
    assert r.delta == pytest.approx(mu * 2 / 1.5)
    assert r.interval[1] - r.interval[0] == pytest.approx(2 * r.delta)
    assert prior_swap_interval(2.5, g0, lambda Z: -(Z - mu), X, 0.5, 1.0).delta == pytest.approx(2.5 * r.delta)
    with pytest.raises(ParamError):
        prior_swap_interval(1.0, g0, g0, X, -1.0, 0.5)


def test_prior_swap_interval_covers_truth():
    lik = P.logistic_regression(np.array([[1.0, 0.5], [-0.4, 1.0], [0.3, -0.7]]),
                                np.array([1.0, -1.0, 1.0]), 0.5)
    q = MCQuadrature(0, 20000, 2)
    mu = np.array([0.4, -0.2])
    nu = solve_lifted(P.add_potentials(lik, P.standard_gaussian(2)), q=q)
    nut = solve_lifted(P.add_potentials(lik, P.gaussian(np.eye(2), mu)), q=q)
    r = prior_swap_interval(1.0, lambda Z: -Z, lambda Z: -(Z - mu), push_samples(nut.map, q),
                            lik.alpha, 1.0, statistic=lambda Z: Z[:, 0])
    truth = map_moments(nu.map)[0][0]
    assert r.interval[0] <= truth <= r.interval[1]


def test_contamination_trivial_cases():
    p = gaussian_log_density([0.0], 1.0)
    X = np.random.default_rng(0).standard_normal((100, 1))
    assert contamination_sensitivity(p, gaussian_log_density([1.0], 1.0), 0.0, X, 0.0, 0.75) == 0.0
    assert contamination_sensitivity(p, p, 0.3, X, 0.0, 1.0) == 0.0
    with pytest.raises(ParamError):
        contamination_sensitivity(p, p, 0.3, X, 0.0, 0.0)


def test_contamination_matches_grid_quadrature():
    eps, a_eps = 0.1, gaussian_mixture_alpha(1.0, [1.0])
    assert a_eps == pytest.approx(0.75)
    p, q = gaussian_log_density([0.0], 1.0), gaussian_log_density([1.0], 1.0)
    X = MCQuadrature(0, 200000, 1).points
    mc = contamination_sensitivity(p, q, eps, X, 0.0, a_eps)
    x = np.linspace(-12, 12, 200001)
    pe = (1 - eps) * norm.pdf(x) + eps * norm.pdf(x, 1.0)
    integrand = (norm.pdf(x, 1.0) / pe) ** 2 * 1.0 ** 2 * norm.pdf(x)
    grid = math.sqrt(integrate.trapezoid(integrand, x)) * eps / a_eps
    assert mc == pytest.approx(grid, rel=1e-2)


def test_mixture_alpha_certificate():
    # -d^2/dx^2 log p_eps >= 1/s^2 - delta^2/(4 s^4) everywhere
    s2, delta, eps = 1.0, 1.5, 0.3
    x = np.linspace(-8, 8, 4001)
    lp = np.log((1 - eps) * norm.pdf(x, 0, 1) + eps * norm.pdf(x, delta, 1))
    h = x[1] - x[0]
    curv = -(lp[2:] - 2 * lp[1:-1] + lp[:-2]) / h ** 2
    assert curv.min() >= gaussian_mixture_alpha(s2, [delta]) - 1e-5


# --- control ---------------------------------------------------------------

def test_control_potential_certificates():
    p = control_potential(quadratic_utility(np.diag([1.0, 3.0])), 2.0)
    assert p.alpha == pytest.approx(0.5) and p.beta == pytest.approx(3.5)
    with pytest.raises(ParamError):
        control_potential(zero_utility(2), 0.0)


def test_control_zero_utility():
    M, sol = control_value(zero_utility(2), 2.0)
    assert abs(M) <= 1e-4
    mean, var = map_moments(sol.map)
    assert np.allclose(var, 2.0, rtol=1e-3) and np.allclose(mean, 0, atol=1e-3)


def test_control_linear_utility_closed_form():
    c, T = np.array([0.5, -1.0]), 2.0
    M, sol = control_value(linear_utility(c), T)
    mean, var = map_moments(sol.map)
    assert np.allclose(mean, T * c, atol=1e-3) and np.allclose(var, T, rtol=1e-3)
    assert M == pytest.approx(T * (c @ c) / 2, abs=1e-3)


def test_control_value_stability_linear_pair():
    c, ct, T = np.array([0.5, -1.0]), np.array([0.6, -0.8]), 2.0
    X = push_samples(control_value(linear_utility(c), T)[1].map, MCQuadrature(0, 20000, 2))
    b = control_value_stability(linear_utility(c), linear_utility(ct), 0.0, T, X)
    G = np.linalg.norm(c - ct)
    Vd = math.sqrt(np.mean((X @ (ct - c)) ** 2))
    assert b == pytest.approx(2 * math.sqrt(T * 2) * G + T / 2 * G ** 2 + Vd, rel=1e-12)
    assert b >= T / 2 * abs(ct @ ct - c @ c)
    assert control_value_stability(linear_utility(c), linear_utility(ct), 1.0, T, X) > b
    assert control_value_stability(linear_utility(c), linear_utility(c), 0.0, T, X) == 0.0
    with pytest.raises(InputError):
        control_value_stability(linear_utility(c), linear_utility(ct), 0.0, T, np.zeros((0, 2)))


def test_control_softmin_bound_dominates():
    T = 1.0
    g, gt = softmin_utility(2, 1.0), softmin_utility(2, 1.3)
    q = MCQuadrature(0, 20000, 2)
    M, sol = control_value(g, T, q=q)
    Mt, _ = control_value(gt, T, q=q)
    b = control_value_stability(g, gt, 1.3, T, push_samples(sol.map, q))
    assert abs(Mt - M) <= b
