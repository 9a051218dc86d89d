"""Variational Bayes robustness: empirical Bayes, prior swapping, contamination."""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import InputError, ParamError
from ..potentials import Potential, linreg_potential  # noqa: F401  (re-exported)
from ..stability import _rms, _samples


def linreg_w2_bound(A, w, tau_hat, tau, prior: Potential, samples_hat) -> float:
    """W2 between optimizers at tau_hat and tau from samples of the tau_hat optimizer.

    |A b - w|_{L2(nu_tau_hat)} |tau_hat - tau| / (alpha_1 tau + alpha_0).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    X = _samples(samples_hat, A.shape[0])
    alpha_1 = float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])
    denom = alpha_1 * tau + prior.alpha
    if not denom > 0:
        raise ParamError("alpha_1 tau + alpha_0 must be positive", key="tau")
    return _rms(X @ A - np.asarray(w, dtype=float)) * abs(tau_hat - tau) / denom


@dataclass(frozen=True)
class LogDensity:
    """Log-density known up to a constant, with its gradient (batch evaluators)."""
    logpdf: Callable
    grad: Callable
    label: str = "density"


def gaussian_log_density(mean, var, label="gaussian"):
    """N(mean, var I) as a LogDensity (normalized)."""
    m = np.atleast_1d(np.asarray(mean, dtype=float))
    d = m.size
    if not var > 0:
        raise ParamError("var must be positive", key="var")
    c = -0.5 * d * math.log(2 * math.pi * var)

    def logpdf(X):
        X = np.atleast_2d(X)
        return c - 0.5 * np.sum((X - m) ** 2, axis=1) / var

    def grad(X):
        return -(np.atleast_2d(X) - m) / var

    return LogDensity(logpdf, grad, label)


def gaussian_mixture_alpha(var, delta_mean):
    """Log-concavity certificate of (1 - eps) N(m, var I) + eps N(m + delta, var I), any eps.

    The negative log-density Hessian is I/var minus the conditional variance of
    the component mean over var^2, which is at most |delta|^2 / (4 var^2).
    """
    delta = np.atleast_1d(np.asarray(delta_mean, dtype=float))
    return 1.0 / var - float(delta @ delta) / (4 * var ** 2)


@dataclass(frozen=True)
class PriorSwapResult:
    delta: float
    grad_diff_l2: float
    center: Optional[float] = None
    interval: Optional[tuple] = None


def prior_swap_interval(ell, grad_log_p, grad_log_p_tilde, samples_tilde, alpha_nd, alpha_d,
                        statistic: Optional[Callable] = None) -> PriorSwapResult:
    """Uncertainty region for E_nu*[phi] from samples of the surrogate-prior optimizer.

    delta = ell |grad log p~ - grad log p|_{L2(nu~)} / (alpha_nd + alpha_d).
    """
    total = alpha_nd + alpha_d
    if not total > 0:
        raise ParamError("alpha_nd + alpha_d must be positive", key="alpha_nd")
    if ell < 0:
        raise ParamError("ell must be nonnegative", key="ell")
    X = _samples(samples_tilde)
    G = _rms(grad_log_p_tilde(X) - grad_log_p(X))
    delta = ell * G / total
    if statistic is None:
        return PriorSwapResult(delta, G)
    center = float(np.mean(statistic(X)))
    return PriorSwapResult(delta, G, center, (center - delta, center + delta))


def contamination_sensitivity(p_ref: LogDensity, q_perturb: LogDensity, eps, samples,
                              alpha_nd, alpha_eps) -> float:
    """W2 bound for the prior (1 - eps) p + eps q against the prior p.

    |(q / p_eps)(grad log q - grad log p)|_{L2(nu*)} eps / (alpha_nd + alpha_eps),
    with the ratio q / p_eps formed in log space.
    """
    total = alpha_nd + alpha_eps
    if not total > 0:
        raise ParamError("alpha_nd + alpha_eps must be positive", key="alpha_eps")
    if not 0 <= eps < 1:
        raise ParamError("eps must lie in [0, 1)", key="eps")
    X = _samples(samples)
    if eps == 0:
        return 0.0
    lp, lq = p_ref.logpdf(X), q_perturb.logpdf(X)
    log_pe = np.logaddexp(math.log1p(-eps) + lp, math.log(eps) + lq)
    ratio = np.exp(lq - log_pe)
    diff = q_perturb.grad(X) - p_ref.grad(X)
    if diff.ndim == 1:
        diff = diff[:, None]
    return _rms(ratio[:, None] * diff) * eps / total


def _check_nonempty(X):
    if X.shape[0] == 0:
        raise InputError("no samples supplied")
