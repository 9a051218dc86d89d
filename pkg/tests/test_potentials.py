import numpy as np
import pytest

from lifted_mfvi import potentials as P
from lifted_mfvi.errors import EvalError, ParamError, ShapeError


def fd_grad(p, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (P.eval(p, x + e) - P.eval(p, x - e)) / (2 * h)
    return g


def test_gaussian_value_grad_hessian():
    p = P.gaussian([[2.0, 1.0], [1.0, 2.0]], [1.0, -1.0])
    assert p.alpha == pytest.approx(1.0) and p.beta == pytest.approx(3.0)
    x = np.array([0.3, 0.2])
    assert P.eval(p, x) == pytest.approx(0.5 * (x - [1, -1]) @ [[2, 1], [1, 2]] @ (x - [1, -1]))
    assert np.allclose(p.grad(x[None])[0], fd_grad(p, x), atol=1e-6)
    assert np.allclose(p.hessian(x[None])[0], [[2, 1], [1, 2]])


def test_gaussian_rejects_indefinite():
    with pytest.raises(ParamError):
        P.gaussian([[1.0, 2.0], [2.0, 1.0]])


def test_eval_shape_and_nonfinite():
    p = P.standard_gaussian(3)
    with pytest.raises(ShapeError):
        P.eval(p, np.zeros(2))
    bad = P.from_callables(1, lambda x: float("nan"), lambda x: x, lambda x: np.eye(1), 1.0, 1.0)
    with pytest.raises(EvalError):
        P.eval(bad, np.zeros(1))


@pytest.mark.parametrize("maker", [
    lambda: P.softplus_1d(),
    lambda: P.separable(P.softplus_1d(), 3),
    lambda: P.perturbed_quadratic(np.diag([1.0, 2.0]), [0.1, 0.2], 0.7),
    lambda: P.logistic_regression(np.array([[1.0, 2.0], [-1.0, 0.5], [0.3, 0.3]]),
                                  np.array([1.0, -1.0, 1.0]), 1.0),
    lambda: P.linreg_potential(np.array([[2.0, 0.5], [0.5, 1.0]]), [1.0, 0.0], 1.5, P.softplus_1d()),
])
def test_gradients_and_certificates(maker, rng):
    p = maker()
    X = rng.standard_normal((40, p.dim)) * 2
    for x in X[:5]:
        assert np.allclose(p.grad(x[None])[0], fd_grad(p, x), atol=1e-5)
    ev = np.linalg.eigvalsh(p.hessian(X))
    assert ev.min() >= p.alpha - 1e-10
    assert ev.max() <= p.beta + 1e-10


def test_linreg_potential_quadratic_case():
    p = P.linreg_potential(np.eye(3), np.zeros(3), 1.0, P.quadratic_1d())
    x = np.array([0.5, -1.0, 2.0])
    assert P.eval(p, x) == pytest.approx(x @ x)
    assert p.alpha == pytest.approx(2.0)


def test_linreg_potential_requires_positive_alpha():
    # tau * lambda_min(A) + alpha_0 = -2 + 1 < 0
    with pytest.raises(ParamError):
        P.linreg_potential(np.diag([-2.0, 1.0]), np.zeros(2), 1.0, P.quadratic_1d())
    with pytest.raises(ParamError):
        P.linreg_potential(np.eye(2), np.zeros(2), -1.0, P.quadratic_1d())


def test_find_mode_matches_mean():
    p = P.gaussian([[3.0, 1.0], [1.0, 2.0]], [0.4, -0.7])
    m = P.find_mode(p)
    assert np.allclose(m.x_star, [0.4, -0.7], atol=1e-8)
    assert m.grad_norm <= 1e-8


def test_find_mode_logistic_gradient_vanishes():
    A = np.array([[1.0, 0.2], [0.3, -1.0], [-0.5, 0.5], [1.0, 1.0]])
    p = P.logistic_regression(A, np.array([1.0, -1.0, 1.0, 1.0]), 0.5)
    m = P.find_mode(p)
    assert np.linalg.norm(p.grad(m.x_star[None])[0]) <= 1e-8


def test_family_domain_and_mean_shift_derivative():
    fam = P.builtin_family("gaussian_mean_shift", P=np.diag([2.0, 1.0]))
    with pytest.raises(ParamError):
        fam.at(20.0)
    x = np.array([[0.3, 0.1]])
    assert np.allclose(fam.grad_theta_grad(0.5, x), [[-2.0, 0.0]])


def test_precision_scale_certificates_uniform():
    fam = P.builtin_family("gaussian_precision_scale", dim=2, theta_domain=(0.5, 2.0))
    assert fam.at(1.0).alpha == pytest.approx(0.5)
    assert fam.at(1.0).beta == pytest.approx(2.0)
    x = np.array([[1.0, -2.0]])
    assert np.allclose(fam.grad_theta_grad(1.0, x), x)


def test_scale_and_add_potentials():
    p = P.gaussian(np.diag([1.0, 2.0]))
    q = P.scale_potential(p, 3.0)
    assert q.alpha == pytest.approx(3.0) and q.beta == pytest.approx(6.0)
    s = P.add_potentials(p, P.standard_gaussian(2))
    assert s.alpha == pytest.approx(2.0)
    assert P.eval(s, np.array([1.0, 1.0])) == pytest.approx(1.5 + 1.0)
    with pytest.raises(ParamError):
        P.scale_potential(p, 0.0)
