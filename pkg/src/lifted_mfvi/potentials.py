"""Target potentials, parametric families and mode finding.

A potential is the negative log-density of a target up to an additive
constant. All evaluators are batch-first: they accept an ``(N, d)`` array and
return ``(N,)``, ``(N, d)`` and ``(N, d, d)`` arrays. Passing a single vector
returns the unbatched shapes.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConvergenceError, EvalError, ParamError, ShapeError


def _spd_bounds(P, name="P"):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[0] != P.shape[1]:
        raise ParamError(f"{name} must be square, got {P.shape}", key=name)
    if not np.allclose(P, P.T, rtol=0, atol=1e-12 * max(1.0, np.abs(P).max())):
        raise ParamError(f"{name} must be symmetric", key=name)
    P = 0.5 * (P + P.T)
    ev = np.linalg.eigvalsh(P)
    if ev[0] <= 0:
        raise ParamError(f"{name} is not positive definite (min eig {ev[0]:.3g})", key=name)
    return P, float(ev[0]), float(ev[-1])


class Potential:
    """Potential V with certified convexity band alpha*I <= hess V <= beta*I."""

    def __init__(self, dim, value, grad, hessian, alpha, beta, label="custom",
                 hess_diag=None):
        dim = int(dim)
        if dim < 1:
            raise ParamError("dim must be positive", key="dim")
        if not (np.isfinite(alpha) and alpha > 0):
            raise ParamError(f"alpha must be > 0, got {alpha}", key="alpha")
        if not (np.isfinite(beta) and beta >= alpha):
            raise ParamError(f"beta must be >= alpha, got beta={beta}, alpha={alpha}",
                             key="beta")
        self.dim = dim
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.label = label
        self._value = value
        self._grad = grad
        self._hessian = hessian
        self._hess_diag = hess_diag

    def _batch(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ShapeError(f"expected points of dimension {self.dim}, got shape {x.shape}")
        return X, single

    def value(self, x):
        X, single = self._batch(x)
        out = np.asarray(self._value(X), dtype=float).reshape(X.shape[0])
        return out[0] if single else out

    def grad(self, x):
        X, single = self._batch(x)
        out = np.asarray(self._grad(X), dtype=float).reshape(X.shape)
        return out[0] if single else out

    def hessian(self, x):
        X, single = self._batch(x)
        out = np.asarray(self._hessian(X), dtype=float).reshape(X.shape[0], self.dim, self.dim)
        return out[0] if single else out

    def hessian_diag(self, x):
        X, single = self._batch(x)
        if self._hess_diag is not None:
            out = np.asarray(self._hess_diag(X), dtype=float).reshape(X.shape)
        else:
            out = np.diagonal(self.hessian(X), axis1=1, axis2=2).copy()
        return out[0] if single else out

    def __repr__(self):
        return f"Potential({self.label!r}, dim={self.dim}, alpha={self.alpha:.6g}, beta={self.beta:.6g})"


def eval(p: Potential, x) -> float:
    """Value of V at a single point, checked for finiteness."""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.dim,):
        raise ShapeError(f"expected a vector of length {p.dim}, got shape {x.shape}")
    v = float(p.value(x))
    if not np.isfinite(v):
        raise EvalError(f"{p.label}: non-finite value at {x.tolist()}")
    return v


# ---------------------------------------------------------------------------
# built-in potentials

def gaussian(P, mean=None, label="gaussian"):
    """V(x) = (x - m)^T P (x - m) / 2."""
    P, lo, hi = _spd_bounds(P)
    d = P.shape[0]
    m = np.zeros(d) if mean is None else np.asarray(mean, dtype=float).reshape(d)

    def value(X):
        Z = X - m
        return 0.5 * np.einsum("ni,ij,nj->n", Z, P, Z)

    def grad(X):
        return (X - m) @ P

    def hessian(X):
        return np.broadcast_to(P, (X.shape[0], d, d))

    pot = Potential(d, value, grad, hessian, lo, hi, label=label,
                    hess_diag=lambda X: np.broadcast_to(np.diag(P), X.shape))
    pot.precision = P
    pot.mean = m
    return pot


def standard_gaussian(d):
    return gaussian(np.eye(d), label="standard_gaussian")


def separable(prior: Potential, d, label=None):
    """V(x) = sum_i v(x_i) for a one-dimensional potential v."""
    if prior.dim != 1:
        raise ParamError("separable potentials need a 1-d component", key="prior")

    def value(X):
        return prior.value(X.reshape(-1, 1)).reshape(X.shape).sum(axis=1)

    def grad(X):
        return prior.grad(X.reshape(-1, 1)).reshape(X.shape)

    def hdiag(X):
        return prior.hessian(X.reshape(-1, 1)).reshape(X.shape)

    def hessian(X):
        H = np.zeros((X.shape[0], d, d))
        idx = np.arange(d)
        H[:, idx, idx] = hdiag(X)
        return H

    return Potential(d, value, grad, hessian, prior.alpha, prior.beta,
                     label=label or f"separable[{prior.label}]", hess_diag=hdiag)


def quadratic_1d(scale=1.0, center=0.0, label="quadratic_1d"):
    """One-dimensional v(x) = scale (x - center)^2 / 2."""
    return gaussian([[scale]], [center], label=label)


def softplus_1d(scale=1.0):
    """v(x) = scale x^2/2 + log(1 + e^x), a skewed log-concave 1-d potential."""

    def value(X):
        x = X[:, 0]
        return 0.5 * scale * x ** 2 + np.logaddexp(0.0, x)

    def grad(X):
        return scale * X + _sigmoid(X)

    def hessian(X):
        s = _sigmoid(X)
        return (scale + s * (1 - s))[:, :, None]

    return Potential(1, value, grad, hessian, scale, scale + 0.25, label="softplus_1d")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_regression(A, y, lam, label="logistic"):
    """V(x) = sum_k log(1 + exp(-y_k a_k^T x)) + lam |x|^2 / 2, y_k in {-1, +1}."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    y = np.asarray(y, dtype=float).reshape(A.shape[0])
    if lam <= 0:
        raise ParamError("lam must be positive", key="lam")
    d = A.shape[1]
    B = y[:, None] * A
    beta = lam + 0.25 * float(np.linalg.eigvalsh(A.T @ A)[-1])

    def value(X):
        Z = X @ B.T
        return np.logaddexp(0.0, -Z).sum(axis=1) + 0.5 * lam * np.einsum("ni,ni->n", X, X)

    def grad(X):
        Z = X @ B.T
        return -_sigmoid(-Z) @ B + lam * X

    def hessian(X):
        s = _sigmoid(X @ B.T)
        W = s * (1 - s)
        return np.einsum("nk,ki,kj->nij", W, B, B) + lam * np.eye(d)

    pot = Potential(d, value, grad, hessian, lam, beta, label=label)
    pot.design = A
    pot.labels = y
    pot.lam = float(lam)
    return pot


def perturbed_quadratic(Q, mean, eta, label="perturbed_quadratic"):
    """V(x) = (x-m)^T Q (x-m)/2 + eta sum_i log cosh x_i.

    For eta >= 0 this is lambda_min(Q)-convex and (lambda_max(Q)+eta)-smooth.
    The Hessian is Lipschitz with constant 4 eta / (3 sqrt 3) in operator norm
    (the sup of |d^3 log cosh| is attained at tanh^2 = 1/3) and the Hessian
    deviation from any reference point is bounded by eta.
    """
    Q, lo, hi = _spd_bounds(Q, "Q")
    if eta < 0:
        raise ParamError("eta must be nonnegative", key="eta")
    d = Q.shape[0]
    m = np.asarray(mean, dtype=float).reshape(d)

    def value(X):
        Z = X - m
        return 0.5 * np.einsum("ni,ij,nj->n", Z, Q, Z) + eta * _logcosh(X).sum(axis=1)

    def grad(X):
        return (X - m) @ Q + eta * np.tanh(X)

    def hessian(X):
        c = eta / np.cosh(X) ** 2
        H = np.broadcast_to(Q, (X.shape[0], d, d)).copy()
        idx = np.arange(d)
        H[:, idx, idx] += c
        return H

    pot = Potential(d, value, grad, hessian, lo, hi + eta, label=label)
    pot.hessian_lipschitz = 4.0 * eta / (3.0 * np.sqrt(3.0))
    pot.hessian_growth_C = eta ** 2
    return pot


def _logcosh(x):
    a = np.abs(x)
    return a + np.log1p(np.exp(-2 * a)) - np.log(2.0)


def from_callables(dim, value, grad, hessian, alpha, beta, label="custom"):
    """Wrap user callables defined on single vectors into a batch potential.

    The convexity certificates alpha and beta are the caller's obligation,
    as are the growth and integrability conditions on V.
    """
    def bv(X):
        return np.array([value(x) for x in X])

    def bg(X):
        return np.array([grad(x) for x in X])

    def bh(X):
        return np.array([hessian(x) for x in X])

    return Potential(dim, bv, bg, bh, alpha, beta, label=label)


def linreg_potential(A, w, tau, prior: Potential, label="linreg"):
    """V_tau(b) = sum_i v(b_i) + (tau/2) b^T A b - tau w^T b."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
        raise ParamError("A must be symmetric", key="A")
    A = 0.5 * (A + A.T)
    d = A.shape[0]
    w = np.asarray(w, dtype=float).reshape(d)
    if not tau > 0:
        raise ParamError("tau must be positive", key="tau")
    if prior.dim != 1:
        raise ParamError("prior must be one-dimensional", key="prior")
    ev = np.linalg.eigvalsh(A)
    alpha = tau * ev[0] + prior.alpha
    beta = tau * ev[-1] + prior.beta
    if alpha <= 0:
        raise ParamError(f"alpha_1 tau + alpha_0 must be positive, got {alpha}", key="tau")

    def value(X):
        v = prior.value(X.reshape(-1, 1)).reshape(X.shape).sum(axis=1)
        return v + 0.5 * tau * np.einsum("ni,ij,nj->n", X, A, X) - tau * X @ w

    def grad(X):
        return prior.grad(X.reshape(-1, 1)).reshape(X.shape) + tau * (X @ A - w)

    def hessian(X):
        H = np.broadcast_to(tau * A, (X.shape[0], d, d)).copy()
        idx = np.arange(d)
        H[:, idx, idx] += prior.hessian(X.reshape(-1, 1)).reshape(X.shape)
        return H

    pot = Potential(d, value, grad, hessian, alpha, beta, label=label)
    pot.A, pot.w, pot.tau, pot.prior = A, w, float(tau), prior
    return pot


# ---------------------------------------------------------------------------
# mode finding

@dataclass(frozen=True)
class Mode:
    x_star: np.ndarray
    grad_norm: float
    iterations: int


def find_mode(p: Potential, x0=None, tol=1e-8, max_iter=20000) -> Mode:
    """Minimize V by gradient descent with step 1/beta, then damped Newton.

    The Newton phase starts once the gradient norm drops below 1e-3 and is
    safeguarded by a backtracking decrease test; the gradient step is kept as
    fallback whenever Newton fails to decrease V.
    """
    x = np.zeros(p.dim) if x0 is None else np.asarray(x0, dtype=float).reshape(p.dim).copy()
    g = p.grad(x)
    gn = float(np.linalg.norm(g))
    for it in range(1, max_iter + 1):
        if gn <= tol:
            return Mode(x, gn, it - 1)
        fx = p.value(x)
        step = None
        if gn < 1e-3:
            try:
                dx = -np.linalg.solve(p.hessian(x), g)
                t = 1.0
                while t > 1e-8:
                    xn = x + t * dx
                    if p.value(xn) <= fx + 1e-4 * t * g @ dx or \
                            np.linalg.norm(p.grad(xn)) < gn:
                        step = xn
                        break
                    t *= 0.5
            except np.linalg.LinAlgError:
                step = None
        if step is None:
            step = x - g / p.beta
        x = step
        g = p.grad(x)
        gn = float(np.linalg.norm(g))
        if not np.isfinite(gn):
            raise EvalError(f"{p.label}: non-finite gradient during mode search")
    if gn <= tol:
        return Mode(x, gn, max_iter)
    raise ConvergenceError(f"find_mode: {max_iter} iterations, |grad|={gn:.3e}",
                           residual=gn, iterations=max_iter)


# ---------------------------------------------------------------------------
# parametric families

class ParametricFamily:
    """theta -> V_theta on an open interval with uniform certificates."""

    def __init__(self, at: Callable[[float], Potential], theta_domain,
                 grad_theta_grad: Optional[Callable] = None,
                 lipschitz_dtheta: Optional[float] = None, label="family"):
        lo, hi = (float(t) for t in theta_domain)
        if not lo < hi:
            raise ParamError("theta_domain must be a nonempty interval", key="theta_domain")
        self.theta_domain = (lo, hi)
        self._at = at
        self._dtg = grad_theta_grad
        self.lipschitz_dtheta = lipschitz_dtheta
        self.label = label

    def _check(self, theta):
        lo, hi = self.theta_domain
        if not lo < theta < hi:
            raise ParamError(f"theta={theta} outside ({lo}, {hi})", key="theta")

    def at(self, theta) -> Potential:
        self._check(theta)
        return self._at(float(theta))

    def grad_theta_grad(self, theta, x):
        """d/dtheta of grad V_theta at x (batch)."""
        self._check(theta)
        if self._dtg is not None:
            x = np.asarray(x, dtype=float)
            return np.asarray(self._dtg(float(theta), x), dtype=float).reshape(x.shape)
        h = 1e-4 * max(1.0, abs(theta))
        return (self._at(theta + h).grad(x) - self._at(theta - h).grad(x)) / (2 * h)

    @property
    def dim(self):
        lo, hi = self.theta_domain
        return self._at(0.5 * (lo + hi)).dim


def builtin_family(kind, **params) -> ParametricFamily:
    """Construct one of the built-in families.

    gaussian_mean_shift: P, direction, mean=0, theta_domain=(-10, 10)
        V_theta(x) = (x - m - theta e)^T P (x - m - theta e)/2
    gaussian_precision_scale: P=I (or dim), mean=0, theta_domain=(lo, hi)
        V_theta(x) = theta (x - m)^T P (x - m)/2
    linreg_tau: A, w, prior, theta_domain=(tau_lo, tau_hi)
    contamination_path: base, log_p, grad_log_p, log_q, grad_log_q, alpha, beta
        V_eps = base - log((1 - eps) p + eps q)
    """
    builders = {
        "gaussian_mean_shift": _mean_shift,
        "gaussian_precision_scale": _precision_scale,
        "linreg_tau": _linreg_tau,
        "contamination_path": _contamination_path,
    }
    if kind not in builders:
        raise ParamError(f"unknown family kind {kind!r}", key="kind")
    return builders[kind](**params)


def _mean_shift(P, direction=None, mean=None, theta_domain=(-10.0, 10.0)):
    P, lo, hi = _spd_bounds(P)
    d = P.shape[0]
    e = np.eye(d)[0] if direction is None else np.asarray(direction, dtype=float).reshape(d)
    m = np.zeros(d) if mean is None else np.asarray(mean, dtype=float).reshape(d)
    Pe = P @ e

    def at(theta):
        pot = gaussian(P, m + theta * e, label=f"mean_shift[{theta:.6g}]")
        return pot

    def dtg(theta, x):
        return np.broadcast_to(-Pe, x.shape)

    fam = ParametricFamily(at, theta_domain, dtg, lipschitz_dtheta=0.0, label="gaussian_mean_shift")
    fam.precision, fam.direction, fam.mean = P, e, m
    return fam


def _precision_scale(P=None, mean=None, theta_domain=(0.5, 2.0), dim=None):
    if P is None:
        P = np.eye(1 if dim is None else int(dim))
    P, lo, hi = _spd_bounds(P)
    d = P.shape[0]
    m = np.zeros(d) if mean is None else np.asarray(mean, dtype=float).reshape(d)
    t_lo, t_hi = (float(t) for t in theta_domain)
    if t_lo <= 0:
        raise ParamError("precision scale domain must be positive", key="theta_domain")
    alpha, beta = t_lo * lo, t_hi * hi

    def at(theta):
        Pt = theta * P
        pot = gaussian(Pt, m, label=f"precision_scale[{theta:.6g}]")
        pot.alpha, pot.beta = alpha, beta
        return pot

    def dtg(theta, x):
        return (x - m) @ P

    fam = ParametricFamily(at, theta_domain, dtg, lipschitz_dtheta=hi, label="gaussian_precision_scale")
    fam.precision, fam.mean = P, m
    return fam


def _linreg_tau(A, w, prior, theta_domain=(0.5, 2.0)):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    w = np.asarray(w, dtype=float)
    t_lo, t_hi = (float(t) for t in theta_domain)
    ev = np.linalg.eigvalsh(0.5 * (A + A.T))
    alpha = min(t_lo * ev[0], t_hi * ev[0]) + prior.alpha
    beta = t_hi * ev[-1] + prior.beta
    if alpha <= 0:
        raise ParamError("family is not uniformly log-concave over the tau domain", key="theta_domain")

    def at(tau):
        pot = linreg_potential(A, w, tau, prior, label=f"linreg[{tau:.6g}]")
        pot.alpha, pot.beta = alpha, beta
        return pot

    def dtg(tau, x):
        return x @ A - w

    fam = ParametricFamily(at, theta_domain, dtg, lipschitz_dtheta=float(ev[-1]), label="linreg_tau")
    fam.A, fam.w, fam.prior = A, w, prior
    return fam


def _contamination_path(base: Potential, log_p, grad_log_p, log_q, grad_log_q,
                        alpha, beta, theta_domain=(-0.5, 1.0)):
    """Posterior potentials under the prior (1 - eps) p + eps q.

    ``alpha`` and ``beta`` certify the whole path; they are user supplied.
    """
    d = base.dim

    def weights(eps, X):
        # (1-eps) p / p_eps and eps q / p_eps, computed in log space
        lp, lq = log_p(X), log_q(X)
        if eps == 0:
            return np.ones_like(lp), np.zeros_like(lq)
        a = np.log1p(-eps) + lp
        b = np.log(eps) + lq
        lz = np.logaddexp(a, b)
        return np.exp(a - lz), np.exp(b - lz)

    def at(eps):
        if not 0 <= eps < 1:
            raise ParamError("contamination weight must lie in [0, 1)", key="eps")

        def value(X):
            lp, lq = log_p(X), log_q(X)
            if eps == 0:
                return base.value(X) - lp
            return base.value(X) - np.logaddexp(np.log1p(-eps) + lp, np.log(eps) + lq)

        def grad(X):
            wp, wq = weights(eps, X)
            return base.grad(X) - (wp[:, None] * grad_log_p(X) + wq[:, None] * grad_log_q(X))

        def hessian(X):
            h = 1e-5
            H = np.empty((X.shape[0], d, d))
            for j in range(d):
                E = np.zeros(d)
                E[j] = h
                H[:, :, j] = (grad(X + E) - grad(X - E)) / (2 * h)
            return 0.5 * (H + np.transpose(H, (0, 2, 1)))

        return Potential(d, value, grad, hessian, alpha, beta, label=f"contamination[{eps:.6g}]")

    def dtg(eps, X):
        # d/deps grad log p_eps = p q (grad log q - grad log p) / p_eps^2
        lp, lq = log_p(X), log_q(X)
        lz = np.logaddexp(np.log1p(-eps) + lp, np.log(eps) + lq) if eps > 0 else lp
        c = np.exp(lp + lq - 2 * lz)
        return -c[:, None] * (grad_log_q(X) - grad_log_p(X))

    lo, hi = theta_domain
    fam = ParametricFamily(at, (lo, hi), dtg, label="contamination_path")
    fam.log_p, fam.grad_log_p, fam.log_q, fam.grad_log_q = log_p, grad_log_p, log_q, grad_log_q
    return fam


def scale_potential(p: Potential, n, label=None):
    """n * V, with certificates scaled accordingly."""
    n = float(n)
    if not n > 0:
        raise ParamError("scale must be positive", key="n")
    return Potential(p.dim, lambda X: n * p.value(X), lambda X: n * p.grad(X),
                     lambda X: n * p.hessian(X), n * p.alpha, n * p.beta,
                     label=label or f"{n:g}*{p.label}")


def add_potentials(*ps: Potential, label=None):
    """Sum of potentials on the same space; certificates add."""
    if not ps:
        raise ParamError("need at least one potential", key="potentials")
    d = ps[0].dim
    if any(q.dim != d for q in ps):
        raise ShapeError("potentials have different dimensions")
    return Potential(d, lambda X: sum(q.value(X) for q in ps),
                     lambda X: sum(q.grad(X) for q in ps),
                     lambda X: sum(q.hessian(X) for q in ps),
                     sum(q.alpha for q in ps), sum(q.beta for q in ps),
                     label=label or "+".join(q.label for q in ps))
