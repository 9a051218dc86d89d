"""Command-line front end.

    lifted-mfvi run CONFIG [--output-dir DIR]
    lifted-mfvi <command> CONFIG [--output-dir DIR]
    lifted-mfvi oracle-check [CONFIG] [--output-dir DIR] [--criteria 1 2 ...] [--repeat]

CONFIG is YAML or JSON. The output directory is taken from --output-dir,
then the LIFTED_MFVI_OUTPUT_DIR environment variable, then the ``output_dir``
key, then ``./lifted_mfvi_out``. Exit codes: 0 success, 1 failed checks or
unexpected library error, 2 ConvergenceError, 3 parameter, domain or
configuration error.
"""

import argparse
import inspect
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import potentials as pots
from .applications import (bvm_linreg, bvm_report, contamination_sensitivity, control_value,
                           control_value_stability, gaussian_log_density, gaussian_mixture_alpha,
                           linear_utility, linreg_w2_bound, prior_swap_interval, quadratic_utility,
                           softmin_utility, zero_utility)
from .errors import ConvergenceError, DomainError, InputError, LiftedMFVIError, ParamError, ShapeError
from .io import dumps, read_map_csv, write_json, write_map_csv
from .sensitivity import finite_diff_check
from .lifted_solver import CaviConfig, SolverConfig, cavi_solve, config_hash, solve_lifted
from .stability import density_envelope, lipschitz_w2_bound
from .transport import MCQuadrature, lp_distance, map_moments, push_samples

ENV_OUTPUT = "LIFTED_MFVI_OUTPUT_DIR"
COMMANDS = ("solve", "cavi", "stability", "sensitivity", "bvm", "linreg", "prior-swap",
            "contamination", "control", "oracle-check")
COMMON_KEYS = {"command", "output_dir", "solver", "threads"}
COMMAND_KEYS = {
    "solve": {"potential", "init_map"},
    "cavi": {"potential", "cavi", "compare"},
    "stability": {"potential", "potential_tilde"},
    "sensitivity": {"family", "theta0", "K", "h_list", "direction"},
    "bvm": {"potential", "n", "certificates", "measure"},
    "linreg": {"A", "w", "tau", "tau_hat", "prior", "n", "measure"},
    "prior-swap": {"likelihood", "prior", "prior_tilde", "ell", "statistic", "alpha_nd", "alpha_d"},
    "contamination": {"likelihood", "p", "q", "eps", "alpha_nd", "alpha_eps"},
    "control": {"utility", "utility_tilde", "T_horizon", "beta"},
    "oracle-check": {"criteria", "fixture", "seed", "repeat"},
}


class ConfigError(ParamError):
    """Malformed configuration; ``key`` names the offending key path."""


# ---------------------------------------------------------------------------
# config -> objects

def _require(cfg, key, where=""):
    if key not in cfg:
        raise ConfigError(f"missing required key {where + key!r}", key=where + key)
    return cfg[key]


def _call(fn, params, where):
    """Call a builder with config params, naming unknown or missing keys."""
    sig = inspect.signature(fn)
    names = set(sig.parameters)
    for k in params:
        if k not in names:
            raise ConfigError(f"unknown key {where + k!r}", key=where + k)
    for name, par in sig.parameters.items():
        if par.default is inspect.Parameter.empty and name not in params:
            raise ConfigError(f"missing required key {where + name!r}", key=where + name)
    try:
        return fn(**params)
    except ParamError as exc:
        if exc.key and not str(exc.key).startswith(where):
            exc.key = where + str(exc.key)
        raise
    except (TypeError, ValueError) as exc:
        if isinstance(exc, LiftedMFVIError):
            raise
        raise ConfigError(f"bad value under {where.rstrip('.')!r}: {exc}", key=where.rstrip(".")) from exc


def _arrays(params):
    return {k: (np.asarray(v, dtype=float) if isinstance(v, list) else v) for k, v in params.items()}


def _fixture_potential():
    from .oracle import load_fixture
    inp = load_fixture()["inputs"]
    return pots.logistic_regression(np.array(inp["A"]), np.array(inp["y"]), inp["lam"])


PRIOR_KINDS = {"quadratic_1d": pots.quadratic_1d, "softplus_1d": pots.softplus_1d}


def build_prior(node, where="prior"):
    if not isinstance(node, dict):
        raise ConfigError(f"{where!r} must be a mapping", key=where)
    node = dict(node)
    kind = node.pop("kind", "quadratic_1d")
    if kind not in PRIOR_KINDS:
        raise ConfigError(f"unknown prior kind {kind!r}", key=where + ".kind")
    return _call(PRIOR_KINDS[kind], node, where + ".")


def build_potential(node, where="potential"):
    if not isinstance(node, dict):
        raise ConfigError(f"{where!r} must be a mapping", key=where)
    node = dict(node)
    kind = _require(node, "kind", where + ".")
    node.pop("kind")
    dot = where + "."
    if kind == "gaussian":
        return _call(pots.gaussian, _arrays(node), dot)
    if kind == "standard_gaussian":
        return _call(pots.standard_gaussian, node, dot)
    if kind == "separable":
        prior = build_prior(_require(node, "prior", dot), dot + "prior")
        node["prior"] = prior
        return _call(pots.separable, node, dot)
    if kind == "logistic_regression":
        return _call(pots.logistic_regression, _arrays(node), dot)
    if kind == "logistic_fixture":
        return _call(_fixture_potential, node, dot)
    if kind == "perturbed_quadratic":
        return _call(pots.perturbed_quadratic, _arrays(node), dot)
    if kind == "linreg":
        node["prior"] = build_prior(_require(node, "prior", dot), dot + "prior")
        return _call(pots.linreg_potential, _arrays(node), dot)
    raise ConfigError(f"unknown potential kind {kind!r}", key=dot + "kind")


FAMILY_KINDS = ("gaussian_mean_shift", "gaussian_precision_scale", "linreg_tau")


def build_family(node, direction=None, where="family"):
    if not isinstance(node, dict):
        raise ConfigError(f"{where!r} must be a mapping", key=where)
    node = _arrays(dict(node))
    kind = _require(node, "kind", where + ".")
    node.pop("kind")
    if kind not in FAMILY_KINDS:
        raise ConfigError(f"unknown family kind {kind!r}", key=where + ".kind")
    if "theta_domain" in node:
        node["theta_domain"] = tuple(float(t) for t in node["theta_domain"])
    if kind == "gaussian_mean_shift" and direction is not None:
        node["direction"] = np.asarray(direction, dtype=float)
    if kind == "linreg_tau":
        node["prior"] = build_prior(_require(node, "prior", where + "."), where + ".prior")
    from .potentials import _linreg_tau, _mean_shift, _precision_scale
    fn = {"gaussian_mean_shift": _mean_shift, "gaussian_precision_scale": _precision_scale,
          "linreg_tau": _linreg_tau}[kind]
    return _call(fn, node, where + ".")


def build_utility(node, where="utility"):
    if not isinstance(node, dict):
        raise ConfigError(f"{where!r} must be a mapping", key=where)
    node = _arrays(dict(node))
    kind = _require(node, "kind", where + ".")
    node.pop("kind")
    fns = {"zero": lambda dim: zero_utility(int(dim)), "linear": linear_utility,
           "quadratic": quadratic_utility, "softmin": lambda dim, scale=1.0: softmin_utility(int(dim), scale)}
    if kind not in fns:
        raise ConfigError(f"unknown utility kind {kind!r}", key=where + ".kind")
    return _call(fns[kind], node, where + ".")


def solver_config(cfg):
    node = cfg.get("solver", {}) or {}
    if not isinstance(node, dict):
        raise ConfigError("'solver' must be a mapping", key="solver")
    for k in node:
        if k not in SolverConfig.__dataclass_fields__ or k == "init":
            raise ConfigError(f"unknown key 'solver.{k}'", key=f"solver.{k}")
    try:
        return SolverConfig(**node)
    except ParamError as exc:
        exc.key = f"solver.{exc.key}"
        raise
    except TypeError as exc:
        raise ConfigError(str(exc), key="solver") from exc


def _number(cfg, key, default=None, positive=False):
    v = cfg.get(key, default)
    if v is None:
        raise ConfigError(f"missing required key {key!r}", key=key)
    try:
        v = float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key!r} must be a number", key=key) from exc
    if positive and not v > 0:
        raise ConfigError(f"{key!r} must be positive", key=key)
    return v


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}", key="config_path")
    try:
        cfg = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}", key="config_path") from exc
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping", key="config_path")
    return cfg


def validate(cfg):
    cmd = _require(cfg, "command")
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}", key="command")
    allowed = COMMON_KEYS | COMMAND_KEYS[cmd]
    for k in cfg:
        if k not in allowed:
            raise ConfigError(f"unknown key {k!r} for command {cmd!r}", key=k)
    threads = cfg.get("threads", 1)
    if threads != 1:
        raise ConfigError("only threads: 1 is supported", key="threads")
    return cmd


def _meta(cfg, seed):
    hashed = {k: v for k, v in cfg.items() if k != "output_dir"}
    return {"command": cfg["command"], "config_hash": config_hash(hashed), "seed": seed,
            "version": __version__}


# ---------------------------------------------------------------------------
# commands

def _marginals(T):
    mean, var = map_moments(T)
    return {"mean": mean, "std": np.sqrt(var)}


def cmd_solve(cfg, out):
    p = build_potential(_require(cfg, "potential"))
    sc = solver_config(cfg)
    init = read_map_csv(cfg["init_map"]) if "init_map" in cfg else None
    sol = solve_lifted(p, sc, init=init)
    write_map_csv(out / "solve_map.csv", sol.map)
    mg = _marginals(sol.map)
    return "solve", {
        "elbo": sol.elbo, "functional_value": sol.functional_value, "residual": sol.residual,
        "iterations": sol.iterations, "marginal_mean": mg["mean"], "marginal_std": mg["std"],
        "map_file": "solve_map.csv", "solver": sc.__dict__, "meta": _meta(cfg, sc.seed)}


def cmd_cavi(cfg, out):
    p = build_potential(_require(cfg, "potential"))
    node = cfg.get("cavi", {}) or {}
    for k in node:
        if k not in CaviConfig.__dataclass_fields__:
            raise ConfigError(f"unknown key 'cavi.{k}'", key=f"cavi.{k}")
    cc = CaviConfig(**node)
    res = cavi_solve(p, cc)
    write_map_csv(out / "cavi_map.csv", res.map)
    rep = {"sweeps": res.sweeps, "final_change": res.change,
           "marginal_mean": [d.mean() for d in res.densities],
           "marginal_std": [math.sqrt(d.var()) for d in res.densities],
           "map_file": "cavi_map.csv", "cavi": cc.__dict__, "meta": _meta(cfg, cc.seed)}
    if cfg.get("compare", False):
        sol = solve_lifted(p, solver_config(cfg))
        rep["lp_distance_vs_lifted"] = lp_distance(res.map, sol.map)
    return "cavi", rep


def cmd_stability(cfg, out):
    p = build_potential(_require(cfg, "potential"))
    pt = build_potential(_require(cfg, "potential_tilde"), "potential_tilde")
    if p.dim != pt.dim:
        raise ConfigError("potential and potential_tilde differ in dimension", key="potential_tilde")
    sc = solver_config(cfg)
    q = MCQuadrature(sc.seed, sc.mc_samples, p.dim, sc.scheme)
    s, st = solve_lifted(p, sc, q), solve_lifted(pt, sc, q)
    rep = lipschitz_w2_bound(p, pt, push_samples(st.map, q), push_samples(s.map, q), seed=sc.seed)
    env = density_envelope(p, q)
    write_map_csv(out / "stability_map.csv", s.map)
    write_map_csv(out / "stability_map_tilde.csv", st.map)
    return "stability", {
        "bound_w2": rep.bound_w2, "bound_w2_reversed": rep.bound_w2_reversed,
        "bound_w2_best": rep.bound_w2_best, "bound_h1": rep.bound_h1,
        "grad_diff_l2": rep.grad_diff_l2, "reward_bound": rep.reward_bound,
        "reward_bound_normalized": rep.reward_bound_normalized, "mean_offset": rep.mean_offset,
        "measured_w2": lp_distance(s.map, st.map), "measured_reward_diff": abs(st.elbo - s.elbo),
        "envelope": {"C": env.C, "log_C": env.log_C, "kl_upper": env.kl_upper,
                     "second_moment_bound": env.second_moment_bound},
        "map_files": ["stability_map.csv", "stability_map_tilde.csv"],
        "meta": dict(_meta(cfg, sc.seed), n=sc.mc_samples, m=sc.grid_m)}


def cmd_sensitivity(cfg, out):
    fam = build_family(_require(cfg, "family"), cfg.get("direction"))
    theta0 = _number(cfg, "theta0")
    K = int(cfg.get("K", 6))
    if K < 0:
        raise ConfigError("'K' must be nonnegative", key="K")
    h_list = cfg.get("h_list", [0.2, 0.1, 0.05])
    if not isinstance(h_list, list):
        raise ConfigError("'h_list' must be a list", key="h_list")
    sc = solver_config(cfg)
    try:
        fd = finite_diff_check(fam, theta0, h_list, sc, K=K)
    except InputError as exc:
        raise ConfigError(str(exc), key="h_list") from exc
    S = fd.solution
    return "sensitivity", {
        "theta0": theta0, "K": K, "coeffs": S.coeffs, "residual": S.residual,
        "lambda_min_estimate": S.lambda_min, "matrix_condition": S.matrix_condition,
        "fd_check": {"h": list(fd.h), "err": list(fd.err), "slope": fd.slope},
        "meta": _meta(cfg, sc.seed)}


def _bvm_dict(r):
    return {"x_n_star": r.x_n_star, "D_n": r.D_n, "n": r.n, "alpha_n": r.alpha_n, "b_n": r.b_n,
            "bound_smooth": r.bound_smooth, "bound_local": r.bound_local,
            "local_inputs": r.local_inputs, "measured_w2": r.measured_w2,
            "mean_sq_error": r.mean_sq_error}


def cmd_bvm(cfg, out):
    f = build_potential(_require(cfg, "potential"))
    n = _number(cfg, "n", positive=True)
    cert = cfg.get("certificates")
    kw = {}
    if cert is None and hasattr(f, "hessian_lipschitz"):
        kw = {"ell_n": f.hessian_lipschitz, "C": f.hessian_growth_C, "tau_n": 0.0}
    elif cert is not None:
        for k in cert:
            if k not in ("ell_n", "tau_n", "s_n", "C"):
                raise ConfigError(f"unknown key 'certificates.{k}'", key=f"certificates.{k}")
        kw = {"ell_n": _number(cert, "ell_n"), "C": _number(cert, "C"),
              "tau_n": float(cert.get("tau_n", 0.0))}
        if "s_n" in cert:
            kw["s_n"] = _number(cert, "s_n", positive=True)
    sc = solver_config(cfg)
    r = bvm_report(f, n, measure=bool(cfg.get("measure", True)), cfg=sc, **kw)
    return "bvm", dict(_bvm_dict(r), meta=_meta(cfg, sc.seed))


def cmd_linreg(cfg, out):
    A = np.asarray(_require(cfg, "A"), dtype=float)
    w = np.asarray(_require(cfg, "w"), dtype=float)
    tau = _number(cfg, "tau", positive=True)
    tau_hat = _number(cfg, "tau_hat", default=tau, positive=True)
    prior = build_prior(cfg.get("prior", {"kind": "quadratic_1d"}))
    sc = solver_config(cfg)
    q = MCQuadrature(sc.seed, sc.mc_samples, A.shape[0], sc.scheme)
    p_hat = pots.linreg_potential(A, w, tau_hat, prior)
    p = pots.linreg_potential(A, w, tau, prior)
    s_hat, s = solve_lifted(p_hat, sc, q), solve_lifted(p, sc, q)
    rep = {"tau": tau, "tau_hat": tau_hat,
           "bound_w2": linreg_w2_bound(A, w, tau_hat, tau, prior, push_samples(s_hat.map, q)),
           "measured_w2": lp_distance(s_hat.map, s.map),
           "elbo": s.elbo, "elbo_hat": s_hat.elbo}
    if "n" in cfg:
        b = bvm_linreg(A, w, tau, prior, _number(cfg, "n", positive=True),
                       measure=bool(cfg.get("measure", True)), cfg=sc)
        rep["bvm"] = _bvm_dict(b)
    rep["meta"] = _meta(cfg, sc.seed)
    return "linreg", rep


def _gauss_prior_spec(node, d, where):
    if not isinstance(node, dict):
        raise ConfigError(f"{where!r} must be a mapping", key=where)
    for k in node:
        if k not in ("mean", "var"):
            raise ConfigError(f"unknown key '{where}.{k}'", key=f"{where}.{k}")
    mean = np.broadcast_to(np.asarray(node.get("mean", 0.0), dtype=float), (d,)).copy()
    var = _number(node, "var", default=1.0, positive=True)
    return mean, var


def cmd_prior_swap(cfg, out):
    lik = build_potential(_require(cfg, "likelihood"), "likelihood")
    d = lik.dim
    m, v = _gauss_prior_spec(_require(cfg, "prior"), d, "prior")
    mt, vt = _gauss_prior_spec(_require(cfg, "prior_tilde"), d, "prior_tilde")
    ell = _number(cfg, "ell", default=1.0)
    stat = cfg.get("statistic", {"kind": "coordinate", "index": 0})
    kind = stat.get("kind", "coordinate")
    if kind == "coordinate":
        idx = int(stat.get("index", 0))
        if not 0 <= idx < d:
            raise ConfigError("statistic.index out of range", key="statistic.index")
        phi = lambda X: X[:, idx]
    elif kind == "sum":
        phi = lambda X: X.sum(axis=1) / math.sqrt(d)
    else:
        raise ConfigError(f"unknown statistic kind {kind!r}", key="statistic.kind")
    alpha_nd = _number(cfg, "alpha_nd", default=lik.alpha)
    alpha_d = _number(cfg, "alpha_d", default=min(1 / v, 1 / vt))
    sc = solver_config(cfg)
    q = MCQuadrature(sc.seed, sc.mc_samples, d, sc.scheme)
    target_t = pots.add_potentials(lik, pots.gaussian(np.eye(d) / vt, mt))
    st = solve_lifted(target_t, sc, q)
    r = prior_swap_interval(ell, lambda X: -(X - m) / v, lambda X: -(X - mt) / vt,
                            push_samples(st.map, q), alpha_nd, alpha_d, phi)
    target = pots.add_potentials(lik, pots.gaussian(np.eye(d) / v, m))
    s = solve_lifted(target, sc, q)
    true_mean = float(np.mean(phi(push_samples(s.map, q))))
    return "prior_swap", {
        "delta": r.delta, "grad_diff_l2": r.grad_diff_l2, "center": r.center,
        "interval": list(r.interval), "statistic_under_prior": true_mean,
        "measured_w2": lp_distance(s.map, st.map), "alpha_nd": alpha_nd, "alpha_d": alpha_d,
        "meta": _meta(cfg, sc.seed)}


def cmd_contamination(cfg, out):
    lik = build_potential(cfg["likelihood"], "likelihood") if "likelihood" in cfg else None
    pnode, qnode = _require(cfg, "p"), _require(cfg, "q")
    d = lik.dim if lik else int(np.size(pnode.get("mean", 0.0)))
    mp, vp = _gauss_prior_spec(pnode, d, "p")
    mq, vq = _gauss_prior_spec(qnode, d, "q")
    eps = _number(cfg, "eps")
    alpha_nd = _number(cfg, "alpha_nd", default=lik.alpha if lik else 0.0)
    if "alpha_eps" in cfg:
        alpha_eps = _number(cfg, "alpha_eps")
    elif vp == vq:
        alpha_eps = gaussian_mixture_alpha(vp, mq - mp)
    else:
        raise ConfigError("alpha_eps is required when p and q have different variances", key="alpha_eps")
    prior_pot = pots.gaussian(np.eye(d) / vp, mp)
    target = pots.add_potentials(lik, prior_pot) if lik else prior_pot
    sc = solver_config(cfg)
    q = MCQuadrature(sc.seed, sc.mc_samples, d, sc.scheme)
    s = solve_lifted(target, sc, q)
    b = contamination_sensitivity(gaussian_log_density(mp, vp), gaussian_log_density(mq, vq), eps,
                                  push_samples(s.map, q), alpha_nd, alpha_eps)
    return "contamination", {"bound_w2": b, "eps": eps, "alpha_nd": alpha_nd,
                             "alpha_eps": alpha_eps, "meta": _meta(cfg, sc.seed)}


def cmd_control(cfg, out):
    g = build_utility(_require(cfg, "utility"))
    gt = build_utility(cfg.get("utility_tilde", cfg["utility"]), "utility_tilde")
    if g.dim != gt.dim:
        raise ConfigError("utility and utility_tilde differ in dimension", key="utility_tilde")
    T = _number(cfg, "T_horizon", positive=True)
    beta = _number(cfg, "beta", default=max(g.beta, gt.beta))
    sc = solver_config(cfg)
    q = MCQuadrature(sc.seed, sc.mc_samples, g.dim, sc.scheme)
    M, sol = control_value(g, T, sc, q)
    Mt, _ = control_value(gt, T, sc, q)
    bound = control_value_stability(g, gt, beta, T, push_samples(sol.map, q))
    write_map_csv(out / "control_map.csv", sol.map)
    return "control", {"value": M, "value_tilde": Mt, "measured_diff": abs(Mt - M),
                       "bound": bound, "T_horizon": T, "beta": beta,
                       "optimizer": _marginals(sol.map), "map_file": "control_map.csv",
                       "meta": _meta(cfg, sc.seed)}


def cmd_oracle_check(cfg, out):
    from .acceptance import format_table, run_suite, suite_report
    seed = int(cfg.get("seed", 0))
    only = cfg.get("criteria")
    fixture = cfg.get("fixture")
    results = run_suite(seed, fixture, only)
    report = suite_report(results, seed)
    print(format_table(results))
    if cfg.get("repeat", False):
        again = suite_report(run_suite(seed, fixture, only), seed)
        same = dumps(again) == dumps(report)
        print(f"10  {'Determinism (byte-identical rerun)':<40} {'PASS' if same else 'FAIL'}")
        report["determinism"] = {"id": 10, "passed": same}
        report["all_passed"] = report["all_passed"] and same
    report["meta"].update(_meta(cfg, seed))
    return "oracle_check", report


HANDLERS = {
    "solve": cmd_solve, "cavi": cmd_cavi, "stability": cmd_stability,
    "sensitivity": cmd_sensitivity, "bvm": cmd_bvm, "linreg": cmd_linreg,
    "prior-swap": cmd_prior_swap, "contamination": cmd_contamination, "control": cmd_control,
    "oracle-check": cmd_oracle_check,
}


def _output_dir(cfg, flag):
    return Path(flag or os.environ.get(ENV_OUTPUT) or cfg.get("output_dir") or "lifted_mfvi_out")


def _error(exc, code, out=None):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    key = getattr(exc, "key", None)
    if key is not None:
        payload["key"] = key
    if isinstance(exc, ConvergenceError):
        payload["residual"] = exc.residual
        payload["iterations"] = exc.iterations
    text = dumps(payload)
    sys.stdout.write(text)
    if out is not None:
        try:
            write_json(out / "error.json", payload)
        except OSError:
            pass
    return code


def run(config, output_dir=None, command=None) -> int:
    """Execute a config (path or mapping); returns the process exit code."""
    out = None
    try:
        cfg = load_config(config) if not isinstance(config, dict) else dict(config)
        if command is not None:
            if cfg.setdefault("command", command) != command:
                raise ConfigError(f"config command {cfg['command']!r} does not match {command!r}",
                                  key="command")
        cmd = validate(cfg)
        out = _output_dir(cfg, output_dir)
        out.mkdir(parents=True, exist_ok=True)
        name, report = HANDLERS[cmd](cfg, out)
        path = write_json(out / f"{name}.json", report)
        if cmd != "oracle-check":
            print(f"wrote {path}")
        return 0 if report.get("all_passed", True) else 1
    except ConvergenceError as exc:
        return _error(exc, 2, out)
    except (ParamError, DomainError, ShapeError, InputError) as exc:
        return _error(exc, 3, out)
    except LiftedMFVIError as exc:
        return _error(exc, 1, out)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="lifted-mfvi", description="Lifted mean-field VI toolkit.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="sub", required=True)
    r = sub.add_parser("run", help="run the command named in a config file")
    r.add_argument("config")
    r.add_argument("--output-dir")
    for name in COMMANDS:
        s = sub.add_parser(name, help=f"run {name} from a config file")
        if name == "oracle-check":
            s.add_argument("config", nargs="?")
            s.add_argument("--criteria", type=int, nargs="+")
            s.add_argument("--seed", type=int)
            s.add_argument("--fixture")
            s.add_argument("--repeat", action="store_true",
                           help="rerun the suite and check byte-identical reports")
        else:
            s.add_argument("config")
        s.add_argument("--output-dir")
    args = ap.parse_args(argv)
    if args.sub == "run":
        return run(args.config, args.output_dir)
    if args.sub == "oracle-check":
        cfg = {"command": "oracle-check"}
        if args.config:
            try:
                cfg = load_config(args.config)
            except ConfigError as exc:
                return _error(exc, 3)
            cfg.setdefault("command", "oracle-check")
        for k in ("criteria", "seed", "fixture"):
            if getattr(args, k) is not None:
                cfg[k] = getattr(args, k)
        if args.repeat:
            cfg["repeat"] = True
        return run(cfg, args.output_dir, "oracle-check")
    return run(args.config, args.output_dir, args.sub)


if __name__ == "__main__":
    sys.exit(main())
