"""Stability bounds for mean-field optimizers and the constants they need."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import DomainError, InputError, ParamError
from .potentials import ParametricFamily, Potential, find_mode
from .transport import MCQuadrature


def _samples(x, dim=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if dim == 1 else x[None, :]
    if x.size == 0 or x.shape[0] == 0:
        raise InputError("no samples supplied")
    if dim is not None and x.shape[1] != dim:
        raise InputError(f"samples have dimension {x.shape[1]}, expected {dim}")
    return x


def _rms(v):
    """sqrt(mean |v_k|^2) over rows."""
    v = np.asarray(v, dtype=float)
    sq = np.sum(v * v, axis=1) if v.ndim == 2 else v * v
    return math.sqrt(sq.sum() / sq.shape[0])


def grad_diff_l2(p: Potential, p_tilde: Potential, samples) -> float:
    """|grad V~ - grad V| in L2 of the empirical measure of ``samples``."""
    X = _samples(samples, p.dim)
    return _rms(p_tilde.grad(X) - p.grad(X))


def value_diff_l2(p, p_tilde, samples):
    X = _samples(samples, p.dim)
    return _rms(p_tilde.value(X) - p.value(X))


@dataclass(frozen=True)
class StabilityReport:
    bound_w2: float
    bound_w2_reversed: Optional[float]
    bound_w2_best: float
    best_direction: str
    bound_h1: float
    grad_diff_l2: float
    grad_diff_l2_reversed: Optional[float]
    alpha_used: float
    alpha_reversed: float
    beta_used: float
    reward_bound: float
    reward_bound_normalized: float
    mean_offset: float
    sample_count: int
    seed: Optional[int] = None

    def to_dict(self):
        from dataclasses import asdict
        return asdict(self)


def lipschitz_w2_bound(p: Potential, p_tilde: Potential, samples_tilde, samples=None,
                       seed=None) -> StabilityReport:
    """W2(nu~, nu) <= |grad V~ - grad V|_{L2(nu~)} / alpha.

    With samples from nu as well, the roles are exchanged to get
    |grad V~ - grad V|_{L2(nu)} / alpha~, and the smaller value is reported
    as ``bound_w2_best``.
    """
    Xt = _samples(samples_tilde, p.dim)
    G = grad_diff_l2(p, p_tilde, Xt)
    bound = G / p.alpha
    rev = G_rev = None
    best, direction = bound, "tilde"
    if samples is not None:
        G_rev = grad_diff_l2(p, p_tilde, samples)
        rev = G_rev / p_tilde.alpha
        if rev < best:
            best, direction = rev, "reversed"
    alpha = min(p.alpha, p_tilde.alpha)
    beta = max(p.beta, p_tilde.beta)
    rb = _reward_terms(G, value_diff_l2(p, p_tilde, Xt), alpha, beta, p.dim)
    offset = float(np.mean(p_tilde.value(Xt) - p.value(Xt)))
    return StabilityReport(
        bound_w2=bound, bound_w2_reversed=rev, bound_w2_best=best, best_direction=direction,
        bound_h1=G / alpha, grad_diff_l2=G, grad_diff_l2_reversed=G_rev,
        alpha_used=p.alpha, alpha_reversed=p_tilde.alpha, beta_used=beta,
        reward_bound=rb[0], reward_bound_normalized=rb[1], mean_offset=offset,
        sample_count=int(Xt.shape[0]), seed=seed)


def h1_bound(p: Potential, p_tilde: Potential, samples_tilde) -> float:
    """Bound on sqrt(|T~ - T|^2 + |T~' - T'|^2) in L2(rho), both potentials alpha-convex."""
    return grad_diff_l2(p, p_tilde, samples_tilde) / min(p.alpha, p_tilde.alpha)


def _reward_terms(G, Vdiff, alpha, beta, d):
    quad = beta / (2 * alpha ** 2) * G ** 2
    plain = 2 * math.sqrt(beta * d) / alpha * G + quad + Vdiff
    normalized = (2 * math.sqrt(beta * d) + 1) / alpha * G + quad
    return plain, normalized


def reward_bound(p: Potential, p_tilde: Potential, samples_tilde, normalized=False,
                 alpha=None, beta=None, return_offset=False):
    """Bound on |R(V~) - R(V)|, R the maximal ELBO.

    The normalized variant assumes int V dnu~ = int V~ dnu~; the empirical
    offset int (V~ - V) dnu~ is returned alongside when ``return_offset``.
    """
    X = _samples(samples_tilde, p.dim)
    a = min(p.alpha, p_tilde.alpha) if alpha is None else alpha
    b = max(p.beta, p_tilde.beta) if beta is None else beta
    G = grad_diff_l2(p, p_tilde, X)
    plain, norm = _reward_terms(G, value_diff_l2(p, p_tilde, X), a, b, p.dim)
    out = norm if normalized else plain
    if return_offset:
        return out, float(np.mean(p_tilde.value(X) - p.value(X)))
    return out


# ---------------------------------------------------------------------------
# density envelope and friends

def log_sphere_area(d):
    """log S(d), S(d) = 2 pi^(d/2) / Gamma(d/2)."""
    return math.log(2.0) + 0.5 * d * math.log(math.pi) - gammaln(0.5 * d)


def sphere_area(d):
    return math.exp(log_sphere_area(d))


def kl_upper_lsi(p: Potential, mu_mean, mu_var, q: Optional[MCQuadrature] = None) -> float:
    """KL(mu | pi) <= I(mu | pi) / (2 alpha) for mu = N(mean, var I).

    I(mu | pi) = E_mu |(x - mean)/var - grad V(x)|^2 is estimated on the
    quadrature; the normalizing constant of pi never enters.
    """
    if not mu_var > 0:
        raise ParamError("mu_var must be positive", key="mu_var")
    m = np.asarray(mu_mean, dtype=float).reshape(p.dim)
    q = q or MCQuadrature(seed=0, n_samples=20_000, dim=p.dim)
    X = m + math.sqrt(mu_var) * q.points
    score = (X - m) / mu_var - p.grad(X)
    return _rms(score) ** 2 / (2 * p.alpha)


@dataclass(frozen=True)
class EnvelopeCertificate:
    C: float
    log_C: float
    alpha: float
    beta: float
    x_star: np.ndarray
    kl_upper: float
    second_moment_bound: float
    C_as_printed: float

    def density(self, x):
        """Envelope C exp(-alpha |x - x*|^2 / 2) evaluated at rows of x."""
        x = np.atleast_2d(x)
        r2 = np.sum((x - self.x_star) ** 2, axis=1)
        return np.exp(self.log_C - 0.5 * self.alpha * r2)


def _exp_or_inf(x: float) -> float:
    # the envelope constant overflows for badly conditioned targets; log_C stays exact
    return math.exp(x) if x < 709.0 else math.inf


def density_envelope(p: Potential, q: Optional[MCQuadrature] = None,
                     kl_upper: Optional[float] = None) -> EnvelopeCertificate:
    """nu*(x) <= C exp(-alpha |x - x*|^2 / 2).

    C = (beta / 2 pi)^(d/2) exp((beta - alpha) d / alpha [2 KL + d]) with KL
    the divergence of N(x*, I/alpha) from the target, replaced by its
    log-Sobolev upper bound. The factor (beta / 2 pi)^(d/2) comes from the
    lower bound on the normalizer of each coordinate update; the
    reciprocal form is kept as ``C_as_printed`` for reference only.
    """
    d, a, b = p.dim, p.alpha, p.beta
    x_star = find_mode(p).x_star
    kl = kl_upper_lsi(p, x_star, 1.0 / a, q) if kl_upper is None else float(kl_upper)
    expo = (b - a) * d / a * (2 * kl + d)
    log_C = 0.5 * d * math.log(b / (2 * math.pi)) + expo
    log_printed = 0.5 * d * math.log(2 * math.pi / b) + expo
    return EnvelopeCertificate(
        C=_exp_or_inf(log_C), log_C=log_C, alpha=a, beta=b, x_star=x_star, kl_upper=kl,
        second_moment_bound=(4 * kl + 2 * d) / a,
        C_as_printed=_exp_or_inf(log_printed))


def l2_comparison_constant(p: Potential, eps, env: Optional[EnvelopeCertificate] = None):
    """C with |f|^2_{L2(nu*)} <= C |f|^2_{L2(N(0, (1+eps)/alpha I))} (probability norms)."""
    if not eps > 0:
        raise ParamError("eps must be positive", key="eps")
    env = env or density_envelope(p)
    a, d = env.alpha, p.dim
    shift = (1 + 1 / eps) * a / (2 * (1 + eps)) * float(env.x_star @ env.x_star)
    gauss_norm = 0.5 * d * math.log(2 * math.pi * (1 + eps) / a)
    return _exp_or_inf(env.log_C + shift + gauss_norm)


def incomplete_gamma_bound(alpha, s, d) -> float:
    """Upper bound on int_{|y| >= s} |y|^2 exp(-alpha |y|^2 / 2) dy, valid for alpha s^2 > d+2."""
    if not (alpha > 0 and s > 0 and d >= 1):
        raise ParamError("need alpha > 0, s > 0, d >= 1", key="alpha")
    if not alpha * s * s > d + 2:
        raise DomainError(f"requires s > sqrt((d+2)/alpha) = {math.sqrt((d + 2) / alpha):.6g}")
    logv = (log_sphere_area(d) + math.log(d + 2) + d * math.log(s) - math.log(2 * alpha)
            - 0.5 * alpha * s * s)
    return math.exp(logv)


def _radial_exp_integral(alpha, d):
    """int_0^inf exp(r - alpha r^2 / 2) r^(d-1) dr by adaptive quadrature."""
    peak = 1.0 / alpha
    f = lambda r: math.exp(r - 0.5 * alpha * r * r + (d - 1) * math.log(r)) if r > 0 else \
        (1.0 if d == 1 else 0.0)
    width = 40.0 / math.sqrt(alpha) + peak + math.sqrt(d / alpha)
    a, _ = integrate.quad(f, 0.0, peak, epsabs=0, epsrel=1e-13, limit=200)
    b, _ = integrate.quad(f, peak, peak + width, epsabs=0, epsrel=1e-13, limit=200)
    return a + b


def explicit_integral(f_kind, alpha, x_star, p_exp=2.0):
    """Closed-form bound on int f(x)^2 exp(-alpha |x - x*|^2 / 2) dx."""
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    d = x_star.size
    r = float(np.linalg.norm(x_star))
    if f_kind == "poly_p":
        p = float(p_exp)
        log_pref = log_sphere_area(d) + 0.5 * (2 * p + d - 4) * math.log(2) - 0.5 * d * math.log(alpha)
        term = (r ** p) * math.exp(gammaln(0.5 * d)) + \
            2 ** (0.5 * p) * alpha ** (-0.5 * p) * math.exp(gammaln(0.5 * (p + d)))
        return math.exp(log_pref) * term
    if f_kind == "exp_half":
        return sphere_area(d) * math.exp(r) * _radial_exp_integral(alpha, d)
    raise ParamError(f"unknown f_kind {f_kind!r}", key="f_kind")


def explicit_parametric_bound(fam: ParametricFamily, theta, theta_tilde, f_kind, L,
                              p_exp=2.0, q: Optional[MCQuadrature] = None) -> float:
    """W2 bound between optimizers at theta and theta~ that needs no solve.

    Requires |grad V_theta~(x) - grad V_theta(x)| <= L |theta~ - theta| f(x)
    with f(x) = |x|^(p/2) ("poly_p") or exp(|x|/2) ("exp_half").
    """
    if f_kind not in ("poly_p", "exp_half"):
        raise ParamError(f"unknown f_kind {f_kind!r}", key="f_kind")
    if L < 0:
        raise ParamError("L must be nonnegative", key="L")
    if L == 0 or theta == theta_tilde:
        return 0.0
    p_th = fam.at(theta)
    env = density_envelope(p_th, q)
    integral = explicit_integral(f_kind, p_th.alpha, env.x_star, p_exp)
    a_tilde = fam.at(theta_tilde).alpha
    if integral == 0:
        return 0.0
    log_root = 0.5 * (env.log_C + math.log(integral))
    return L * _exp_or_inf(log_root) / a_tilde * abs(theta_tilde - theta)


def gaussian_abs_moment(r):
    """E|Z|^r for Z ~ N(0, 1)."""
    return math.exp(0.5 * r * math.log(2) + gammaln(0.5 * (r + 1)) - 0.5 * math.log(math.pi))


def wp_bound(fam: ParametricFamily, theta, theta0, samples_theta, p=2.0):
    """(map_bound, derivative_bound) for the L^p distance between optimizers.

    ``samples_theta`` are draws from the optimizer at ``theta``.
    """
    if p < 2:
        raise ParamError("p must be >= 2", key="p")
    pt, p0 = fam.at(theta), fam.at(theta0)
    X = _samples(samples_theta, pt.dim)
    D = pt.grad(X) - p0.grad(X)
    Gp = float(np.mean(np.sum(D * D, axis=1) ** (0.5 * p)) ** (1.0 / p))
    a, b, d = fam_alpha_beta(fam, theta, theta0)
    map_bound = d ** (0.5 * (p - 2)) * (a + math.sqrt(d) * b) / a ** 2 * Gp
    kappa = b / a
    r = p / (p - 1)
    M_r = (0.5 * math.pi) ** r * gaussian_abs_moment(r)
    const = M_r ** ((p - 1) / p) * (d ** (0.5 * (p - 2)) + d ** (p - 1) * kappa +
                                    d ** (0.5 * (2 * p - 1)) * kappa ** 2) / a
    return map_bound, const * Gp


def fam_alpha_beta(fam, *thetas):
    pots = [fam.at(t) for t in thetas]
    return min(q.alpha for q in pots), max(q.beta for q in pots), pots[0].dim
