"""Derivative of the lifted optimizer with respect to a scalar parameter.

The derivative S solves B(S, R) = -int <d_theta grad V(T0(u)), R(u)> rho(du)
for all R, with

    B(S, R) = int <hess V(T0(u)) S(u), R(u)> rho(du)
              + sum_i int S_i' R_i' / (T0_i')^2 d rho_1.

Trial and test functions are normalized probabilists' Hermite polynomials
h_k = He_k / sqrt(k!) in each coordinate.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import hermite_e as He
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import ndtr

from .errors import AssemblyError, InputError, MonotonicityError, ParamError
from .potentials import ParametricFamily, Potential
from .lifted_solver import SolverConfig, solve_lifted
from .transport import MCQuadrature, TransportMap, eval_map, eval_slope

_SQRT2PI = math.sqrt(2 * math.pi)


class HermiteBasis:
    """h_0, ..., h_K orthonormal in L2(N(0, 1)); h_k' = sqrt(k) h_{k-1}."""

    def __init__(self, K):
        K = int(K)
        if K < 0:
            raise ParamError("K must be nonnegative", key="K")
        self.K = K

    @property
    def size(self):
        return self.K + 1

    def eval(self, u):
        """Array of shape u.shape + (K+1,)."""
        u = np.asarray(u, dtype=float)
        out = np.empty(u.shape + (self.K + 1,))
        out[..., 0] = 1.0
        if self.K >= 1:
            out[..., 1] = u
        for k in range(1, self.K):
            out[..., k + 1] = (u * out[..., k] - math.sqrt(k) * out[..., k - 1]) / math.sqrt(k + 1)
        return out

    def eval_deriv(self, u):
        h = self.eval(u)
        out = np.zeros_like(h)
        for k in range(1, self.K + 1):
            out[..., k] = math.sqrt(k) * h[..., k - 1]
        return out

    def monomial_coeffs(self):
        """Rows: coefficients of h_k in the monomial basis (ascending powers)."""
        C = np.zeros((self.K + 1, self.K + 1))
        for k in range(self.K + 1):
            e = np.zeros(k + 1)
            e[k] = 1.0
            c = He.herme2poly(e) / math.sqrt(math.factorial(k))
            C[k, :c.size] = c
        return C

    def h1_gram(self):
        return np.diag(1.0 + np.arange(self.K + 1))

    def gh_rule(self, n=None):
        """Gauss-Hermite nodes/weights for the standard normal."""
        n = n or max(2 * self.K + 20, 40)
        x, w = He.hermegauss(n)
        return x, w / _SQRT2PI


def _cell_moments(a, b, nmax):
    """M_n = int_a^b u^n phi(u) du for n = 0..nmax, vectorized over cells."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    fa, fb = np.isfinite(a), np.isfinite(b)
    a0, b0 = np.where(fa, a, 0.0), np.where(fb, b, 0.0)
    pa = np.where(fa, np.exp(-0.5 * a0 ** 2) / _SQRT2PI, 0.0)
    pb = np.where(fb, np.exp(-0.5 * b0 ** 2) / _SQRT2PI, 0.0)
    M = np.zeros((nmax + 1,) + a.shape)
    M[0] = ndtr(b) - ndtr(a)
    if nmax >= 1:
        M[1] = pa - pb
    for n in range(2, nmax + 1):
        M[n] = a0 ** (n - 1) * pa - b0 ** (n - 1) * pb + (n - 1) * M[n - 2]
    return M


def _derivative_block(T0: TransportMap, basis: HermiteBasis):
    """int h_a' h_b' / (T0_i')^2 d rho_1 for each coordinate, exactly per cell."""
    K = basis.K
    d = T0.dim
    out = np.zeros((d, K + 1, K + 1))
    if K == 0:
        return out
    C = basis.monomial_coeffs()
    # derivative coefficients: h_k' = sqrt(k) h_{k-1}
    D = np.zeros((K + 1, K + 1))
    for k in range(1, K + 1):
        D[k] = math.sqrt(k) * C[k - 1]
    u = T0.grid.nodes
    a = np.concatenate([[-np.inf], u])
    b = np.concatenate([u, [np.inf]])
    M = _cell_moments(a, b, 2 * K)                      # (2K+1, m+1)
    piece = np.clip(np.arange(u.size + 1) - 1, 0, u.size - 2)
    # product polynomial coefficients P[a, b, n]
    P = np.zeros((K + 1, K + 1, 2 * K + 1))
    for i in range(K + 1):
        for j in range(K + 1):
            P[i, j, :] = np.convolve(D[i], D[j])[:2 * K + 1]
    for i in range(d):
        inv = 1.0 / T0.slopes()[i][piece] ** 2          # (m+1,)
        wmom = M @ inv                                  # (2K+1,)
        out[i] = P @ wmom
    return out


def assemble_bilinear(T0: TransportMap, p0: Potential, basis: HermiteBasis,
                      q: MCQuadrature, n_gh=None):
    """Galerkin matrix of B, size d(K+1) x d(K+1), index (i, a) -> i*(K+1) + a.

    The potential part integrates the own coordinate u_i by Gauss-Hermite
    quadrature and the remaining coordinates on the frozen quadrature; the
    (i, j) and (j, i) estimates are averaged, which symmetrizes the matrix.
    The derivative part is integrated exactly cell by cell.
    """
    d, n = T0.dim, basis.size
    if p0.dim != d or q.dim != d:
        raise ParamError("dimension mismatch between map, potential and quadrature", key="dim")
    xg, wg = basis.gh_rule(n_gh)
    hg = basis.eval(xg)                                 # (G, n)
    U = q.points
    HU = basis.eval(U)                                  # (N, d, n)
    B = np.zeros((d * n, d * n))
    base = eval_map(T0, U)                              # (N, d)
    Tg = eval_map(T0, np.repeat(xg[:, None], d, axis=1))  # (G, d)
    for i in range(d):
        # Hessians at points whose i-th coordinate sits on a GH node
        G, N = xg.size, U.shape[0]
        acc = np.zeros((d, n, n))                       # acc[j][a, b]: h_a(u_i), h_b(u_j)
        for g in range(G):
            X = base.copy()
            X[:, i] = Tg[g, i]
            H = p0.hessian(X)[:, i, :]                  # (N, d) entries d_ij V
            # sum over samples of H_ij h_b(u_j); own-coordinate factor h_a(xg)
            S = np.einsum("nj,njb->jb", H, HU) / N      # (d, n)
            # in the diagonal block both factors sit on the GH node
            S[i] = np.mean(H[:, i]) * hg[g]
            acc += wg[g] * hg[g][None, :, None] * S[:, None, :]
        for j in range(d):
            B[i * n:(i + 1) * n, j * n:(j + 1) * n] += 0.5 * acc[j]
            B[j * n:(j + 1) * n, i * n:(i + 1) * n] += 0.5 * acc[j].T
    Dblk = _derivative_block(T0, basis)
    for i in range(d):
        B[i * n:(i + 1) * n, i * n:(i + 1) * n] += Dblk[i]
    return 0.5 * (B + B.T)


def assemble_rhs(fam: ParametricFamily, theta0, T0: TransportMap, basis: HermiteBasis,
                 q: MCQuadrature, n_gh=None):
    """Entries -E[(d_theta grad V(T0(u)))_j h_b(u_j)], index j*(K+1) + b."""
    d, n = T0.dim, basis.size
    xg, wg = basis.gh_rule(n_gh)
    hg = basis.eval(xg)
    base = eval_map(T0, q.points)
    Tg = eval_map(T0, np.repeat(xg[:, None], d, axis=1))
    rhs = np.zeros(d * n)
    for j in range(d):
        for g in range(xg.size):
            X = base.copy()
            X[:, j] = Tg[g, j]
            F = fam.grad_theta_grad(theta0, X)[:, j]
            rhs[j * n:(j + 1) * n] -= wg[g] * np.mean(F) * hg[g]
    return rhs


@dataclass(frozen=True)
class SensitivitySolution:
    coeffs: np.ndarray
    residual: float
    matrix_condition: float
    lambda_min: float
    basis: HermiteBasis
    matrix: np.ndarray
    rhs: np.ndarray

    def eval(self, u):
        """S(u) for rows u of shape (N, d)."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return np.einsum("nik,ik->ni", self.basis.eval(u), self.coeffs)

    def l2_norm(self):
        return float(np.linalg.norm(self.coeffs))


def solve_derivative(fam: ParametricFamily, theta0, T0: TransportMap, basis: HermiteBasis,
                     q: MCQuadrature, n_gh=None) -> SensitivitySolution:
    p0 = fam.at(theta0)
    B = assemble_bilinear(T0, p0, basis, q, n_gh)
    rhs = assemble_rhs(fam, theta0, T0, basis, q, n_gh)
    try:
        cf = cho_factor(B)
    except LinAlgError as exc:
        raise AssemblyError("bilinear form is not positive definite; increase the "
                            "number of quadrature points or lower K") from exc
    c = cho_solve(cf, rhs)
    ev = np.linalg.eigvalsh(B)
    res = float(np.linalg.norm(B @ c - rhs))
    return SensitivitySolution(c.reshape(T0.dim, basis.size), res, float(ev[-1] / ev[0]),
                               float(ev[0]), basis, B, rhs)


def first_order_predict(T0: TransportMap, S: SensitivitySolution, theta, theta0) -> TransportMap:
    """Node values t + (theta - theta0) S(u_j); must stay strictly increasing."""
    u = T0.grid.nodes
    Su = np.einsum("jk,ik->ij", S.basis.eval(u), S.coeffs)
    vals = T0.values + (theta - theta0) * Su
    if not np.all(np.diff(vals, axis=1) > 0):
        raise MonotonicityError(
            f"first-order prediction at theta={theta} is not monotone; step too large")
    return TransportMap(T0.grid, vals)


def l2_diff_map_vs_basis(D_values, grid, S: SensitivitySolution, order=20, tail=12.0):
    """|D - S|_{L2(rho)} where D is piecewise linear on ``grid`` (affine tails)."""
    x, w = np.polynomial.legendre.leggauss(order)
    u = grid.nodes
    edges = [np.linspace(-tail, u[0], 25)] + [u] + [np.linspace(u[-1], tail, 25)]
    edges = np.unique(np.concatenate(edges))
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    pts = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]
    pts = pts.ravel()
    wts = (half[:, None] * w[None, :]).ravel() * np.exp(-0.5 * pts ** 2) / _SQRT2PI
    d = D_values.shape[0]
    Dm = TransportMap(grid, D_values, check=False)
    Dp = eval_map(Dm, np.repeat(pts[:, None], d, axis=1))
    Sp = S.eval(np.repeat(pts[:, None], d, axis=1))
    return float(math.sqrt(np.sum(wts[:, None] * (Dp - Sp) ** 2)))


@dataclass(frozen=True)
class FiniteDiffReport:
    h: tuple
    err: tuple
    slope: float
    solution: SensitivitySolution


def finite_diff_check(fam: ParametricFamily, theta0, h_list, cfg: Optional[SolverConfig] = None,
                      K=6, q: Optional[MCQuadrature] = None) -> FiniteDiffReport:
    """Compare S with central differences of solved maps at theta0 +/- h."""
    h_list = [float(h) for h in h_list]
    if not h_list or any(h <= 0 for h in h_list):
        raise InputError("finite-difference steps must be positive")
    cfg = cfg or SolverConfig()
    p0 = fam.at(theta0)
    q = q or MCQuadrature(cfg.seed, cfg.mc_samples, p0.dim, cfg.scheme)
    T0 = solve_lifted(p0, cfg, q).map
    S = solve_derivative(fam, theta0, T0, HermiteBasis(K), q)
    errs = []
    for h in h_list:
        Tp = _solve_at(fam, theta0 + h, cfg, q).map
        Tm = _solve_at(fam, theta0 - h, cfg, q).map
        D = (Tp.values - Tm.values) / (2 * h)
        errs.append(l2_diff_map_vs_basis(D, T0.grid, S))
    if len(h_list) >= 2 and all(e > 0 for e in errs):
        slope = float(np.polyfit(np.log(h_list), np.log(errs), 1)[0])
    else:
        slope = float("nan")
    return FiniteDiffReport(tuple(h_list), tuple(errs), slope, S)


def _solve_at(fam, theta, cfg, q):
    try:
        return solve_lifted(fam.at(theta), cfg, q)
    except Exception as exc:
        exc.args = (f"theta={theta}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
        raise
