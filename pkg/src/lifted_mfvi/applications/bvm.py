"""Gaussian surrogates for mean-field posteriors at large sample size."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from ..errors import DomainError, ParamError
from ..oracle import GaussianProduct
from ..potentials import Potential, find_mode, linreg_potential, scale_potential
from ..lifted_solver import SolverConfig, solve_lifted
from ..transport import MCQuadrature, TransportMap, lp_distance


@dataclass(frozen=True)
class BvMReport:
    x_n_star: np.ndarray
    D_n: np.ndarray
    n: int
    alpha_n: float
    b_n: float
    bound_smooth: float
    bound_local: Optional[float] = None
    local_inputs: Optional[dict] = None
    measured_w2: Optional[float] = None
    mean_sq_error: Optional[float] = None

    @property
    def surrogate(self):
        return GaussianProduct(self.x_n_star, 1.0 / np.sqrt(self.D_n))


def _positive(**kw):
    for k, v in kw.items():
        if not (np.isfinite(v) and v > 0):
            raise ParamError(f"{k} must be positive, got {v}", key=k)


def bvm_surrogate(f: Potential, n, x0=None) -> GaussianProduct:
    """N(x_n*, D_n^-1), D_n the diagonal of n hess f(x_n*)."""
    _positive(n=n)
    x = find_mode(f, x0).x_star
    D = n * np.diag(f.hessian(x))
    return GaussianProduct(x, 1.0 / np.sqrt(D))


def bvm_bound_smooth(alpha_n, b_n, d, n) -> float:
    """W2 bound 2 b_n sqrt(d / (alpha_n^3 n))."""
    _positive(alpha_n=alpha_n, b_n=b_n, d=d, n=n)
    return 2.0 * b_n * math.sqrt(d / (alpha_n ** 3 * n))


def bvm_bound_local(alpha_n, b_n, ell_n, tau_n, s_n, C, d, n) -> float:
    """W2 bound under a local Hessian-Lipschitz condition and exponential growth."""
    _positive(alpha_n=alpha_n, b_n=b_n, d=d, n=n, s_n=s_n)
    if ell_n < 0 or C < 0:
        raise ParamError("ell_n and C must be nonnegative", key="ell_n" if ell_n < 0 else "C")
    gap = n * alpha_n - tau_n
    if not (0 <= tau_n and gap > 0):
        raise DomainError(f"need 0 <= tau_n < n alpha_n, got tau_n={tau_n}")
    if not s_n > math.sqrt((d + 2) / gap):
        raise DomainError(f"need s_n > sqrt((d+2)/(n alpha_n - tau_n)) = {math.sqrt((d + 2) / gap):.6g}")
    first = ell_n ** 2 * (d * d + 2 * d) / (3 * alpha_n ** 4 * n ** 2)
    second = 0.0
    if C > 0:
        log2 = (0.5 * d * math.log(0.5 * n * b_n) + math.log(C) + math.log(d + 2) + d * math.log(s_n)
                - gammaln(0.5 * d) - 2 * math.log(alpha_n) - math.log(gap) - 0.5 * gap * s_n ** 2)
        second = math.exp(log2)
    return math.sqrt(first + second)


def optimal_local_radius(alpha_n, b_n, ell_n, tau_n, C, d, n):
    """Radius s_n minimizing the local bound over [lo, 20 lo], lo the admissible minimum.

    Past 20 lo the tail term is below exp(-200 (d+2)) and the bound is flat.
    """
    gap = n * alpha_n - tau_n
    lo = math.sqrt((d + 2) / gap) * (1 + 1e-9)
    obj = lambda t: bvm_bound_local(alpha_n, b_n, ell_n, tau_n, lo * math.exp(t), C, d, n)
    res = optimize.minimize_scalar(obj, bounds=(0.0, math.log(20.0)), method="bounded",
                                   options={"xatol": 1e-10})
    return lo * math.exp(res.x)


def _measure(target: Potential, sur: GaussianProduct, cfg, q):
    sol = solve_lifted(target, cfg, q)
    G = TransportMap.affine(sol.map.grid, sur.mean, sur.std)
    from ..transport import map_moments
    mean, _ = map_moments(sol.map)
    return lp_distance(sol.map, G, 2), float(np.sum((mean - sur.mean) ** 2))


def bvm_report(f: Potential, n, ell_n=None, tau_n=0.0, s_n=None, C=None, measure=False,
               cfg: Optional[SolverConfig] = None, q: Optional[MCQuadrature] = None,
               b_n=None) -> BvMReport:
    """Surrogate, both bounds (when local certificates are supplied) and optionally
    the measured W2 to the solved optimizer of exp(-n f)."""
    sur = bvm_surrogate(f, n)
    a, b = f.alpha, f.beta if b_n is None else b_n
    smooth = bvm_bound_smooth(a, b, f.dim, n)
    local, inputs = None, None
    if ell_n is not None and C is not None:
        if s_n is None:
            s_n = optimal_local_radius(a, b, ell_n, tau_n, C, f.dim, n)
        local = bvm_bound_local(a, b, ell_n, tau_n, s_n, C, f.dim, n)
        inputs = {"ell_n": ell_n, "tau_n": tau_n, "s_n": s_n, "C": C}
    w2 = mse = None
    if measure:
        w2, mse = _measure(scale_potential(f, n), sur, cfg, q)
    return BvMReport(sur.mean, 1.0 / sur.std ** 2, int(n), a, b, smooth, local, inputs, w2, mse)


def bvm_linreg(A, w, tau, prior: Potential, n, alpha_n=None, b_n=None, measure=False,
               cfg: Optional[SolverConfig] = None, q: Optional[MCQuadrature] = None) -> BvMReport:
    """Gaussian surrogate for the linear model with target exp(-n V_tau).

    V_tau(b) = sum v(b_i) + tau b^T A b / 2 - tau w^T b is the per-observation
    potential; it is (tau alpha_n + alpha_0)-convex and (tau b_n + b_0)-smooth,
    and D_n is n times the diagonal of tau A + hess v at the mode.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    ev = np.linalg.eigvalsh(0.5 * (A + A.T))
    a_n = float(ev[0]) if alpha_n is None else float(alpha_n)
    bb_n = float(ev[-1]) if b_n is None else float(b_n)
    if ev[0] < a_n - 1e-12 or ev[-1] > bb_n + 1e-12:
        raise ParamError("need b_n I >= A >= alpha_n I", key="alpha_n")
    a = tau * a_n + prior.alpha
    b = tau * bb_n + prior.beta
    if not a > 0:
        raise ParamError("tau alpha_n + alpha_0 must be positive", key="tau")
    f = linreg_potential(A, w, tau, prior)
    mode = find_mode(f).x_star
    D = n * np.diag(f.hessian(mode))
    sur = GaussianProduct(mode, 1.0 / np.sqrt(D))
    bound = 2.0 * math.sqrt(f.dim * b ** 2 / (n * a ** 3))
    w2 = mse = None
    if measure:
        w2, mse = _measure(scale_potential(f, n), sur, cfg, q)
    return BvMReport(mode, D, int(n), a, b, bound, None, None, w2, mse)
