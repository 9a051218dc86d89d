"""Independent reference solutions.

Nothing here reuses the transport-map or solver code paths: the Gaussian
oracle is closed form, and the two-dimensional oracle runs exact alternating
minimization of KL on a dense product grid.
"""

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import ndtr

from .errors import ConvergenceError, ParamError, ShapeError


@dataclass(frozen=True)
class GaussianTarget:
    mean: np.ndarray
    precision: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.precision, dtype=float))
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if P.shape != (m.size, m.size) or not np.allclose(P, P.T):
            raise ParamError("precision must be a symmetric matrix matching the mean", key="precision")
        try:
            np.linalg.cholesky(P)
        except np.linalg.LinAlgError as exc:
            raise ParamError("precision is not positive definite", key="precision") from exc
        object.__setattr__(self, "precision", P)
        object.__setattr__(self, "mean", m)


@dataclass(frozen=True)
class GaussianProduct:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        s = np.broadcast_to(np.asarray(self.std, dtype=float), m.shape).copy()
        if not np.all(s > 0):
            raise ParamError("std must be positive", key="std")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "std", s)

    @property
    def dim(self):
        return self.mean.size


def gaussian_mfvi(t: GaussianTarget) -> GaussianProduct:
    """Mean-field optimum of N(m, P^-1): N(m, diag(P)^-1)."""
    return GaussianProduct(t.mean.copy(), 1.0 / np.sqrt(np.diag(t.precision)))


def gaussian_product_w2(a: GaussianProduct, b: GaussianProduct) -> float:
    if a.dim != b.dim:
        raise ShapeError("dimension mismatch")
    return float(math.sqrt(np.sum((a.mean - b.mean) ** 2 + (a.std - b.std) ** 2)))


def fixed_point_residual(p, prod: GaussianProduct, n_gh=20, n_x=101, width=4.0):
    """max_j sup_x |log nu_j(x) + E_{nu_-j} V(x, X_-j) - c_j| on a grid.

    The expectation over the other coordinates uses a tensor Gauss-Hermite
    rule, so this is meant for small d.
    """
    d = prod.dim
    x, w = np.polynomial.hermite_e.hermegauss(n_gh)
    w = w / w.sum()
    worst = 0.0
    for j in range(d):
        others = [k for k in range(d) if k != j]
        if others:
            mesh = np.meshgrid(*([x] * len(others)), indexing="ij")
            Z = np.column_stack([g.ravel() for g in mesh])
            Wt = np.prod(np.meshgrid(*([w] * len(others)), indexing="ij"), axis=0).ravel()
        else:
            Z, Wt = np.zeros((1, 0)), np.ones(1)
        xs = prod.mean[j] + prod.std[j] * np.linspace(-width, width, n_x)
        E = np.empty(n_x)
        for a, xv in enumerate(xs):
            X = np.empty((Z.shape[0], d))
            X[:, j] = xv
            for c, k in enumerate(others):
                X[:, k] = prod.mean[k] + prod.std[k] * Z[:, c]
            E[a] = Wt @ p.value(X)
        log_nu = -0.5 * ((xs - prod.mean[j]) / prod.std[j]) ** 2
        r = log_nu + E
        worst = max(worst, float(np.max(np.abs(r - r.mean()))))
    return worst


# ---------------------------------------------------------------------------
# brute-force two-dimensional oracle

@dataclass(frozen=True)
class OracleDensity:
    x: np.ndarray
    density: np.ndarray

    @property
    def h(self):
        return float(self.x[1] - self.x[0])

    def mass(self):
        return float(np.sum(self.density) * self.h)

    def mean(self):
        return float(np.sum(self.x * self.density) * self.h)

    def var(self):
        mu = self.mean()
        return float(np.sum((self.x - mu) ** 2 * self.density) * self.h)

    def quantile(self, v):
        # cell-centred masses: CDF is linear across each cell of width h
        edges = np.concatenate([[self.x[0] - 0.5 * self.h], self.x + 0.5 * self.h])
        cdf = np.concatenate([[0.0], np.cumsum(self.density * self.h)])
        cdf /= cdf[-1]
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        return np.interp(v, cdf[keep], edges[keep])


@dataclass(frozen=True)
class BruteForceResult:
    marginals: tuple
    sweeps: int
    change: float


def brute_force_mfvi_2d(p, n=1025, half_width=9.0, tol=1e-10, max_sweeps=100_000):
    """Alternating exact coordinate minimization of KL on an n x n grid.

    Grid masses are attached to cell centres; each update sets
    nu_1 proportional to exp(-sum_b V(x_a, y_b) nu_2(b)) and vice versa,
    until the L1 change of both marginals is at most ``tol``.
    """
    if p.dim != 2:
        raise ShapeError("brute-force oracle is two-dimensional")
    c = optimize.minimize(lambda z: float(p.value(z)), np.zeros(2), jac=lambda z: p.grad(z),
                          method="BFGS", options={"gtol": 1e-12}).x
    hw = half_width / math.sqrt(p.alpha)
    x1 = np.linspace(c[0] - hw, c[0] + hw, n)
    x2 = np.linspace(c[1] - hw, c[1] + hw, n)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    Vm = p.value(np.column_stack([X1.ravel(), X2.ravel()])).reshape(n, n)
    if not np.all(np.isfinite(Vm)):
        raise ParamError("potential is not finite on the oracle grid", key="potential")

    def update(E):
        e = np.exp(-(E - E.min()))
        return e / e.sum()

    w1 = update(0.5 * p.beta * (x1 - c[0]) ** 2)
    w2 = update(0.5 * p.beta * (x2 - c[1]) ** 2)
    change = np.inf
    for sweep in range(1, max_sweeps + 1):
        n1 = update(Vm @ w2)
        n2 = update(Vm.T @ n1)
        change = max(np.abs(n1 - w1).sum(), np.abs(n2 - w2).sum())
        w1, w2 = n1, n2
        if change <= tol:
            break
    else:
        raise ConvergenceError(f"brute force: L1 change {change:.3e} after {max_sweeps} sweeps",
                               residual=change, iterations=max_sweeps)
    h1, h2 = x1[1] - x1[0], x2[1] - x2[0]
    return BruteForceResult((OracleDensity(x1, w1 / h1), OracleDensity(x2, w2 / h2)),
                            sweep, float(change))


def marginal_w2(dens: OracleDensity, map_eval, order=20, cut=8.0, cells=400):
    """1-d W2 between an oracle marginal and u -> map_eval(u) pushed from N(0, 1)."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(-cut, cut, cells + 1)
    half = 0.5 * np.diff(edges)
    u = ((edges[:-1] + half)[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel() * np.exp(-0.5 * u ** 2) / math.sqrt(2 * math.pi)
    diff = np.asarray(map_eval(u)) - dens.quantile(ndtr(u))
    return float(math.sqrt(np.sum(wt * diff ** 2) / np.sum(wt)))


def marginal_w2_oracles(a: OracleDensity, b: OracleDensity, n=20001):
    """1-d W2 between two grid densities through their quantile functions."""
    v = (np.arange(n) + 0.5) / n
    return float(math.sqrt(np.mean((a.quantile(v) - b.quantile(v)) ** 2)))


# ---------------------------------------------------------------------------
# committed fixture

def logistic_fixture_inputs(seed=20240611, n_obs=30, lam=1.0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_obs, 2))
    truth = np.array([0.8, -0.5])
    prob = 1.0 / (1.0 + np.exp(-A @ truth))
    y = np.where(rng.random(n_obs) < prob, 1.0, -1.0)
    return {"A": A.round(12).tolist(), "y": y.tolist(), "lam": lam}


def input_hash(inputs):
    blob = json.dumps(inputs, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def build_logistic_fixture(inputs=None, n=1025, half_width=9.0):
    from .potentials import logistic_regression
    inputs = inputs or logistic_fixture_inputs()
    p = logistic_regression(np.array(inputs["A"]), np.array(inputs["y"]), inputs["lam"])
    res = brute_force_mfvi_2d(p, n=n, half_width=half_width)
    return {
        "inputs": inputs,
        "input_hash": input_hash(inputs),
        "grid": {"n": n, "half_width": half_width},
        "sweeps": res.sweeps,
        "marginals": [
            {"x0": float(m.x[0]), "x1": float(m.x[-1]), "density": [float(v) for v in m.density],
             "mean": m.mean(), "var": m.var()}
            for m in res.marginals
        ],
    }


def load_fixture_marginals(fx):
    out = []
    for m in fx["marginals"]:
        dens = np.array(m["density"])
        out.append(OracleDensity(np.linspace(m["x0"], m["x1"], dens.size), dens))
    return tuple(out)


def fixture_path():
    """Location of the committed logistic fixture shipped with the package."""
    from pathlib import Path
    return Path(__file__).parent / "data" / "logistic2d.json"


def load_fixture(path=None):
    """Read a fixture and verify its input hash."""
    from pathlib import Path
    path = Path(path) if path is not None else fixture_path()
    fx = json.loads(path.read_text())
    if input_hash(fx["inputs"]) != fx["input_hash"]:
        raise ParamError(f"{path}: input hash mismatch", key="input_hash")
    return fx
