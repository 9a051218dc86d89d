"""Distributed stochastic control through its mean-field reformulation.

For drift control with quadratic cost over horizon T, the value of the best
distributed control equals sup over product measures mu of
int g dmu - KL(mu | N(0, T I)), which is a mean-field problem for the
potential V(x) = -g(x) + |x|^2 / (2T).
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp, softmax

from ..errors import InputError, ParamError
from ..potentials import Potential
from ..lifted_solver import SolverConfig, solve_lifted
from ..stability import _rms, _samples
from ..transport import MCQuadrature


@dataclass(frozen=True)
class Utility:
    """Concave beta-smooth utility g with batch evaluators."""
    dim: int
    value: Callable
    grad: Callable
    hessian: Callable
    beta: float
    label: str = "utility"


def zero_utility(d):
    return Utility(d, lambda X: np.zeros(len(X)), lambda X: np.zeros_like(X),
                   lambda X: np.zeros((len(X), d, d)), 0.0, "zero")


def linear_utility(c):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    d = c.size
    return Utility(d, lambda X: X @ c, lambda X: np.broadcast_to(c, X.shape),
                   lambda X: np.zeros((len(X), d, d)), 0.0, "linear")


def quadratic_utility(Q, c=None):
    """g(x) = -x^T Q x / 2 + c^T x with Q positive semidefinite."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    ev = np.linalg.eigvalsh(0.5 * (Q + Q.T))
    if ev[0] < -1e-12:
        raise ParamError("Q must be positive semidefinite for a concave utility", key="Q")
    d = Q.shape[0]
    c = np.zeros(d) if c is None else np.asarray(c, dtype=float)
    return Utility(d, lambda X: -0.5 * np.einsum("ni,ij,nj->n", X, Q, X) + X @ c,
                   lambda X: -X @ Q + c, lambda X: np.broadcast_to(-Q, (len(X), d, d)),
                   float(max(ev[-1], 0.0)), "quadratic")


def softmin_utility(d, scale=1.0):
    """g(x) = -scale * log sum_i exp(x_i): concave and scale-smooth."""
    def value(X):
        return -scale * logsumexp(X, axis=1)

    def grad(X):
        return -scale * softmax(X, axis=1)

    def hessian(X):
        s = softmax(X, axis=1)
        return -scale * (np.einsum("ni,ij->nij", s, np.eye(d)) - np.einsum("ni,nj->nij", s, s))

    return Utility(d, value, grad, hessian, float(scale), "softmin")


def control_potential(g: Utility, T_horizon) -> Potential:
    """V(x) = -g(x) + |x|^2 / (2T), (1/T)-convex and (beta_g + 1/T)-smooth."""
    if not (np.isfinite(T_horizon) and T_horizon > 0):
        raise ParamError("T_horizon must be positive", key="T_horizon")
    T = float(T_horizon)
    d = g.dim
    pot = Potential(d, lambda X: -g.value(X) + 0.5 * np.sum(X * X, axis=1) / T,
                    lambda X: -g.grad(X) + X / T,
                    lambda X: -g.hessian(X) + np.eye(d) / T,
                    1.0 / T, g.beta + 1.0 / T, label=f"control[{g.label}]")
    return pot


def control_value(g: Utility, T_horizon, cfg: Optional[SolverConfig] = None,
                  q: Optional[MCQuadrature] = None):
    """sup_mu int g dmu - KL(mu | N(0, T I)) and the optimizer.

    This is the maximal ELBO of the control potential minus (d/2) log(2 pi T),
    the log-normalizer of N(0, T I) that the potential leaves out.
    """
    p = control_potential(g, T_horizon)
    sol = solve_lifted(p, cfg, q)
    return sol.elbo - 0.5 * g.dim * math.log(2 * math.pi * T_horizon), sol


def control_value_stability(g: Utility, g_tilde: Utility, beta, T_horizon, samples) -> float:
    """Bound on |M(g~) - M(g)| from samples of the optimizer for g."""
    if not T_horizon > 0:
        raise ParamError("T_horizon must be positive", key="T_horizon")
    if beta < 0:
        raise ParamError("beta must be nonnegative", key="beta")
    X = _samples(samples, g.dim)
    G = _rms(g_tilde.grad(X) - g.grad(X))
    Vd = _rms(g_tilde.value(X) - g.value(X))
    k = beta * T_horizon ** 2 + T_horizon
    return 2 * math.sqrt(k * g.dim) * G + 0.5 * k * G ** 2 + Vd
