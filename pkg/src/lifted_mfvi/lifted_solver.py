"""Lifted mean-field problem: functional, first variation, solvers, ELBO.

The functional on maps T = (T_1, ..., T_d) is

    F_V(T) = -sum_i int log T_i' d rho_1 + int V(T(u)) rho(du),

whose minimizer pushes N(0, I_d) onto the mean-field optimum. The entropy
part is integrated exactly on the grid cells; the potential part uses a
frozen quadrature.
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from . import __version__
from .errors import ConvergenceError, DomainError, EvalError, ParamError
from .potentials import Potential, find_mode
from .transport import (MCQuadrature, QuantileGrid, TransportMap, nodes_from_slopes,
                        project_band)

ELBO_CONST = 0.5 * (math.log(2 * math.pi) + 1.0)


@dataclass(frozen=True)
class SolverConfig:
    grid_m: int = 64
    mc_samples: int = 20_000
    seed: int = 0
    tol: float = 1e-8
    max_iters: int = 200
    init: str = "auto"
    scheme: str = "lhs"

    def __post_init__(self):
        if self.grid_m < 3:
            raise ParamError("grid_m must be at least 3", key="grid_m")
        if self.mc_samples < 2:
            raise ParamError("mc_samples must be at least 2", key="mc_samples")
        if not self.tol > 0:
            raise ParamError("tol must be positive", key="tol")
        if self.max_iters < 1:
            raise ParamError("max_iters must be positive", key="max_iters")

    def hash(self):
        return config_hash(asdict(self))


def config_hash(obj):
    blob = json.dumps(obj, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class LiftedSolution:
    map: TransportMap
    functional_value: float
    residual: float
    iterations: int
    config_hash: str
    history: tuple = ()
    elbo: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "elbo", -self.functional_value + self.map.dim * ELBO_CONST)


class _Lifted:
    """Discretized functional with the quadrature interpolation weights cached."""

    def __init__(self, p: Potential, grid: QuantileGrid, q: MCQuadrature):
        if q.dim != p.dim:
            raise ParamError("quadrature dimension does not match the potential", key="dim")
        self.p, self.grid, self.q = p, grid, q
        self.d, self.m, self.N = p.dim, grid.m, q.n_samples
        self.j, self.lam = grid.locate(q.points)          # (N, d)
        self.W = grid.cell_weights()                       # (m-1,)
        self.du = grid.spacing
        self.c = grid.median_index
        # t_i = A x_i with x_i = (anchor, slopes)
        m, c = self.m, self.c
        A = np.zeros((m, m))
        A[:, 0] = 1.0
        for k in range(m - 1):
            if k >= c:
                A[k + 1:, 1 + k] = self.du[k]
            else:
                A[:k + 1, 1 + k] = -self.du[k]
        self.A = A

    # ----- node-value space
    def points(self, t):
        rows = np.arange(self.d)[None, :]
        t0 = t[rows, self.j]
        return t0 + self.lam * (t[rows, self.j + 1] - t0)

    def entropy(self, t):
        s = np.diff(t, axis=1) / self.du
        if np.any(s <= 0):
            raise DomainError("map is not strictly increasing")
        return -float(np.sum(self.W * np.log(s)))

    def value(self, t):
        X = self.points(t)
        v = self.p.value(X)
        if not np.all(np.isfinite(v)):
            raise EvalError(f"{self.p.label}: non-finite potential at quadrature points")
        return self.entropy(t) + float(self.q.mean(v)), X

    def scatter(self, G):
        """Adjoint of ``points``: node gradient from per-point gradients (N, d)."""
        out = np.empty((self.d, self.m))
        for i in range(self.d):
            w0 = G[:, i] * (1 - self.lam[:, i])
            w1 = G[:, i] * self.lam[:, i]
            out[i] = np.bincount(self.j[:, i], w0, self.m) + \
                np.bincount(self.j[:, i] + 1, w1, self.m)
        return out / self.N

    def grad_t(self, t, X=None):
        if X is None:
            X = self.points(t)
        s = np.diff(t, axis=1) / self.du
        e = self.W / (s * self.du)
        g = np.zeros_like(t)
        g[:, :-1] += e
        g[:, 1:] -= e
        return g + self.scatter(self.p.grad(X))

    def hess_potential_t(self, X):
        """Dense (d m) x (d m) node-space Hessian of the potential term."""
        H = self.p.hessian(X)
        d, m = self.d, self.m
        out = np.zeros((d * m, d * m))
        lam, j = self.lam, self.j
        for i in range(d):
            for k in range(i, d):
                h = H[:, i, k]
                blk = np.zeros(m * m)
                for ai, wi in ((j[:, i], 1 - lam[:, i]), (j[:, i] + 1, lam[:, i])):
                    for bk, wk in ((j[:, k], 1 - lam[:, k]), (j[:, k] + 1, lam[:, k])):
                        blk += np.bincount(ai * m + bk, h * wi * wk, m * m)
                blk = blk.reshape(m, m) / self.N
                out[i * m:(i + 1) * m, k * m:(k + 1) * m] = blk
                if k != i:
                    out[k * m:(k + 1) * m, i * m:(i + 1) * m] = blk.T
        return out

    # ----- (anchor, slope) space
    def to_x(self, t):
        s = np.diff(t, axis=1) / self.du
        return np.concatenate([t[:, self.c:self.c + 1], s], axis=1)

    def to_t(self, x):
        return nodes_from_slopes(self.grid, x[:, 0], x[:, 1:])

    def fgh(self, x, need_hess=True):
        t = self.to_t(x)
        F, X = self.value(t)
        X_grad = self.p.grad(X)
        gpot = self.scatter(X_grad) @ self.A
        s = x[:, 1:]
        g = gpot.copy()
        g[:, 1:] -= self.W / s
        if not need_hess:
            return F, g, None
        Ht = self.hess_potential_t(X)
        d, m = self.d, self.m
        Ablk = np.kron(np.eye(d), self.A)
        Hx = Ablk.T @ Ht @ Ablk
        ent = np.zeros((d, m))
        ent[:, 1:] = self.W / s ** 2
        Hx[np.diag_indices_from(Hx)] += ent.ravel()
        return F, g, Hx


def eval_functional(T: TransportMap, p: Potential, q: MCQuadrature) -> float:
    prob = _Lifted(p, T.grid, q)
    return prob.value(T.values)[0]


def eval_first_variation(T: TransportMap, p: Potential, q: MCQuadrature):
    """Gradient of the discretized functional with respect to node values, (d, m)."""
    prob = _Lifted(p, T.grid, q)
    prob.entropy(T.values)
    return prob.grad_t(T.values)


def elbo(T: TransportMap, p: Potential, q: MCQuadrature) -> float:
    return -eval_functional(T, p, q) + T.dim * ELBO_CONST


def initial_map(p: Potential, grid: QuantileGrid):
    """Affine map through the mode with slope 1/sqrt(beta)."""
    x_star = find_mode(p).x_star
    return TransportMap.affine(grid, x_star, 1.0 / math.sqrt(p.beta))


def solve_lifted(p: Potential, cfg: Optional[SolverConfig] = None,
                 q: Optional[MCQuadrature] = None, init: Optional[TransportMap] = None,
                 grid: Optional[QuantileGrid] = None) -> LiftedSolution:
    """Minimize the lifted functional over maps with slopes in the band.

    Projected Newton iteration (Bertsekas) on (anchor, slopes) coordinates,
    where the slope band [1/sqrt(beta), 1/sqrt(alpha)] is a box: free
    variables take a Newton step, variables pinned at a bound with an
    outward gradient take a scaled gradient step, the trial point is
    projected back onto the box and accepted after Armijo backtracking along
    the projection arc. Accepted steps never increase the functional.
    """
    cfg = cfg or SolverConfig()
    grid = grid or QuantileGrid.gaussian(cfg.grid_m)
    if q is None:
        q = MCQuadrature(cfg.seed, cfg.mc_samples, p.dim, cfg.scheme)
    prob = _Lifted(p, grid, q)
    lo, hi = 1.0 / math.sqrt(p.beta), 1.0 / math.sqrt(p.alpha)

    if init is None:
        T0 = initial_map(p, grid)
    else:
        if init.dim != p.dim:
            raise DomainError("initial map has the wrong dimension")
        T0 = project_band(init, p.alpha, p.beta) if init.grid == grid else \
            project_band(TransportMap(grid, _resample_values(init, grid)), p.alpha, p.beta)
    x = prob.to_x(T0.values)
    x[:, 1:] = np.clip(x[:, 1:], lo, hi)

    def proj(z):
        z = z.copy()
        z[:, 1:] = np.clip(z[:, 1:], lo, hi)
        return z

    F, g, H = prob.fgh(x)
    history = [F]
    res = float(np.linalg.norm(x - proj(x - g)))
    it = 0
    while res > cfg.tol:
        if it >= cfg.max_iters:
            raise ConvergenceError(
                f"solve_lifted: {cfg.max_iters} iterations, residual {res:.3e}",
                residual=res, iterations=it)
        it += 1
        eps = min(1e-6, res)
        s, gs = x[:, 1:], g[:, 1:]
        active = np.zeros_like(x, dtype=bool)
        active[:, 1:] = ((s <= lo + eps) & (gs > 0)) | ((s >= hi - eps) & (gs < 0))
        act = active.ravel()
        free = ~act
        direc = np.zeros(x.size)
        gf = g.ravel()
        Hd = np.diag(H)
        if free.any():
            Hff = H[np.ix_(free, free)]
            try:
                direc[free] = -cho_solve(cho_factor(Hff), gf[free])
            except LinAlgError:
                direc[free] = -gf[free] / Hd[free]
        direc[act] = -gf[act] / Hd[act]
        direc = direc.reshape(x.shape)

        step, accepted = 1.0, False
        for _ in range(60):
            xt = proj(x + step * direc)
            try:
                Ft, gt, _ = prob.fgh(xt, need_hess=False)
            except DomainError:
                step *= 0.5
                continue
            dec = float(np.sum(g * (xt - x)))
            if Ft <= F + 1e-4 * dec or (Ft <= F and
                                        np.linalg.norm(xt - proj(xt - gt)) < res):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        assert Ft <= F, "accepted step increased the functional"
        x = xt
        F, g, H = prob.fgh(x)
        history.append(F)
        res = float(np.linalg.norm(x - proj(x - g)))

    if res > cfg.tol:
        raise ConvergenceError(
            f"solve_lifted: line search stalled at residual {res:.3e}", residual=res,
            iterations=it)
    T = TransportMap(grid, prob.to_t(x), p.alpha, p.beta)
    return LiftedSolution(T, F, res, it, cfg.hash(), tuple(history))


def _resample_values(T, grid):
    from .transport import resample
    return resample(T, grid).values


# ---------------------------------------------------------------------------
# CAVI baseline

@dataclass(frozen=True)
class CaviConfig:
    n_grid: int = 513
    half_width: float = 8.0
    mc_samples: int = 4096
    seed: int = 0
    tol: float = 1e-7
    max_sweeps: int = 500
    grid_m: int = 64
    scheme: str = "lhs"

    def hash(self):
        return config_hash(asdict(self))


class GridDensity:
    """Density values on a uniform grid, normalized by the trapezoid rule."""

    def __init__(self, x, density):
        x = np.asarray(x, dtype=float)
        f = np.clip(np.asarray(density, dtype=float), 0.0, None)
        mass = np.trapezoid(f, x)
        if not mass > 0:
            raise DomainError("density has no mass")
        self.x = x
        self.density = f / mass

    @property
    def h(self):
        return self.x[1] - self.x[0]

    def mass(self):
        return float(np.trapezoid(self.density, self.x))

    def cdf_nodes(self):
        f = self.density
        c = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(self.x))])
        return c / c[-1]

    def quantile(self, v):
        """Inverse of the piecewise-quadratic CDF of the piecewise-linear density."""
        v = np.asarray(v, dtype=float)
        C = self.cdf_nodes()
        x, f = self.x, self.density / np.trapezoid(self.density, self.x)
        k = np.clip(np.searchsorted(C, v, side="right") - 1, 0, x.size - 2)
        h = x[k + 1] - x[k]
        f0, f1 = f[k], f[k + 1]
        r = np.clip(v - C[k], 0.0, None)
        # f0 s + (f1 - f0) s^2 / (2h) = r on the cell
        a = 0.5 * (f1 - f0) / h
        den = f0 + np.sqrt(np.maximum(f0 ** 2 + 4 * a * r, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(den > 0, 2 * r / den, 0.0)
        return x[k] + np.clip(s, 0.0, h)

    def mean(self):
        return float(np.trapezoid(self.x * self.density, self.x))

    def var(self):
        mu = self.mean()
        return float(np.trapezoid((self.x - mu) ** 2 * self.density, self.x))


@dataclass(frozen=True)
class CaviResult:
    densities: tuple
    map: TransportMap
    sweeps: int
    change: float
    changes: tuple = ()


def _expected_potential(p, j, xg, others, chunk=1_000_000):
    """E[V(x, X_{-j})] for every x in xg, with X_{-j} given as rows (n, d)."""
    n = others.shape[0]
    out = np.empty(xg.size)
    per = max(1, chunk // n)
    for s in range(0, xg.size, per):
        xs = xg[s:s + per]
        X = np.repeat(others[None, :, :], xs.size, axis=0)
        X[:, :, j] = xs[:, None]
        v = p.value(X.reshape(-1, p.dim)).reshape(xs.size, n)
        out[s:s + per] = v.sum(axis=1) / n
    if not np.all(np.isfinite(out)):
        raise EvalError(f"{p.label}: non-finite potential during CAVI update")
    return out


def cavi_solve(p: Potential, cfg: Optional[CaviConfig] = None,
               q: Optional[MCQuadrature] = None) -> CaviResult:
    """Cyclic coordinate updates log nu_j(x_j) = -E[V(x_j, X_{-j})] + const.

    The other coordinates are sampled by inverse-CDF transforms of a frozen
    Gaussian quadrature pushed through Phi, so successive sweeps reuse the
    same random numbers. Stops when the largest L1 change of a marginal in a
    sweep is at most ``tol``.
    """
    from scipy.special import ndtr
    cfg = cfg or CaviConfig()
    d = p.dim
    mode = find_mode(p).x_star
    hw = cfg.half_width / math.sqrt(p.alpha)
    grids = [np.linspace(mode[i] - hw, mode[i] + hw, cfg.n_grid) for i in range(d)]
    s0 = 1.0 / math.sqrt(p.beta)
    dens = [GridDensity(g, np.exp(-0.5 * ((g - mode[i]) / s0) ** 2)) for i, g in enumerate(grids)]
    if q is None:
        q = MCQuadrature(cfg.seed, cfg.mc_samples, d, cfg.scheme)
    V = ndtr(q.points)

    change = np.inf
    changes = []
    sweeps = 0
    while sweeps < cfg.max_sweeps:
        sweeps += 1
        change = 0.0
        for j in range(d):
            others = np.column_stack([dens[i].quantile(V[:, i]) for i in range(d)])
            E = _expected_potential(p, j, grids[j], others)
            new = GridDensity(grids[j], np.exp(-(E - E.min())))
            dl1 = float(np.trapezoid(np.abs(new.density - dens[j].density), grids[j]))
            change = max(change, dl1)
            dens[j] = new
        changes.append(change)
        if change <= cfg.tol:
            break
    else:
        raise ConvergenceError(f"cavi_solve: {cfg.max_sweeps} sweeps, L1 change {change:.3e}",
                               residual=change, iterations=sweeps)
    grid = QuantileGrid.gaussian(cfg.grid_m)
    levels = ndtr(grid.nodes)
    vals = np.vstack([dens[i].quantile(levels) for i in range(d)])
    return CaviResult(tuple(dens), TransportMap(grid, vals), sweeps, change, tuple(changes))
