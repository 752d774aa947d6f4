"""Command-line front end.

Settings come from an optional INI-style config (``--config``) with
sections [stream], [policy], [estimate], [grid], [meanfield] and
[output]; command-line flags override the file.  Every CSV starts with a
``# schema: artcollector-<table> v1`` comment line.

Exit codes: 0 ok, 1 verification failure, 2 usage or config error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import os
import sys
from contextlib import contextmanager

import numpy as np

from . import bounds as bnd
from .dynamics import Policy
from .env import GammaStream, env_moments, stream_from_config
from .errors import NumericError
from .lyapunov import (nu_boundary, nu_cf, nu_direct, nu_gig_diagonal, nu_transfer,
                       nu_via_ratio)
from .meanfield import (MeanSpec, gamma_one_limits, mean_trajectory, mu, mu_gradient_signs)
from .optimize import classify_regime, grid_search

SEED_ENV = "ARTCOLLECTOR_SEED"
DEFAULT_SEED = 12345
METHODS = ("direct", "transfer", "cf", "cf-v", "ratio", "boundary", "gig")

ESTIMATE_COLUMNS = ("lambda", "theta", "method", "value", "cert_type", "cert_value",
                    "stderr", "bound", "iterations", "seed")
HEATMAP_COLUMNS = ("lambda", "theta", "nu", "cert", "iters", "flag")
MEANFIELD_COLUMNS = ("n", "U", "V", "alphaU_plus_V")

COLUMN_HELP = """\
CSV columns:
  estimate : lambda, theta, method, value (nu, nats/period), cert_type
             (stderr|analytic|mixed|none), cert_value (stderr, bound, or
             bound + 3*stderr), stderr, bound, iterations, seed
  heatmap  : lambda, theta, nu, cert (stderr for direct, bound for transfer),
             iters, flag (negative, nonconverged; ';'-separated, empty if none)
  bounds   : estimate columns; method is bound:<name> (lower_*, upper_*,
             dual_* for the Y-side), followed by one reference nu row
  meanfield: n, U, V, alphaU_plus_V
"""


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@contextmanager
def _sink(path):
    if path in (None, "", "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write_table(path, table: str, columns, rows):
    with _sink(path) as fh:
        fh.write(f"# schema: artcollector-{table} v1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


# ---------------------------------------------------------------------------
# config


def _load_config(path):
    cp = configparser.ConfigParser()
    if path:
        if not os.path.exists(path):
            raise UsageError(f"config file not found: {path}")
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise UsageError(f"cannot parse config: {exc}")
    return cp


def _section(cp, name) -> dict:
    return dict(cp[name]) if cp.has_section(name) else {}


def _seed(args, stream_cfg):
    if args.seed is not None:
        return args.seed
    if stream_cfg.get("seed") not in (None, ""):
        return int(stream_cfg["seed"])
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}")
    return DEFAULT_SEED


def _stream(args, cp):
    cfg = _section(cp, "stream")
    flag_map = {"model": "kind", "eps": "eps_low", "delta": "delta_low", "eta": "high",
                "h": "h", "r": "r", "s": "s", "stay": "stay"}
    for flag, key in flag_map.items():
        v = getattr(args, flag, None)
        if v is not None:
            cfg[key] = v
    cfg["seed"] = _seed(args, cfg)
    try:
        return stream_from_config(cfg)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad stream spec: {exc}")


def _policies(args, cp):
    cfg = _section(cp, "policy")
    out = []
    if args.policies:
        text = args.policies
    elif args.lam is not None or args.theta is not None:
        if args.lam is None or args.theta is None:
            raise UsageError("--lambda and --theta go together")
        try:
            return [Policy(args.lam, args.theta)]
        except ValueError as exc:
            raise UsageError(str(exc))
    elif "policies" in cfg:
        text = cfg["policies"]
    elif "lambda" in cfg and "theta" in cfg:
        text = f"{cfg['lambda']}:{cfg['theta']}"
    else:
        raise UsageError("no policy given (use --lambda/--theta or --policies)")
    try:
        for item in text.replace(";", ",").split(","):
            if item.strip():
                lam, th = item.split(":")
                out.append(Policy(float(lam), float(th)))
    except ValueError as exc:
        raise UsageError(f"bad policy list {text!r}: {exc}")
    return out


def _opt(args, cfg, name, conv, default):
    v = getattr(args, name, None)
    if v is not None:
        return v
    if name in cfg:
        try:
            return conv(cfg[name])
        except ValueError:
            raise UsageError(f"bad value for {name}: {cfg[name]!r}")
    return default


def _methods(args, cfg):
    text = args.method or cfg.get("method", "direct")
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise UsageError(f"unknown method {','.join(bad) or text!r}; choose from "
                         f"{', '.join(METHODS)}")
    return methods


def _output(args, cp, key="csv"):
    if getattr(args, "out", None):
        return args.out
    return _section(cp, "output").get(key)


# ---------------------------------------------------------------------------
# commands


def _estimate_one(p, method, stream, o):
    if p.on_boundary:
        return nu_boundary(p, stream, o["mc_budget"])
    if method == "direct":
        return nu_direct(p, stream.clone(), o["rel_tol"], o["max_iter"], reps=o["reps"],
                         min_iter=o["min_iter"])
    if method == "transfer":
        return nu_transfer(p, stream, o["iters"])
    if method in ("cf", "cf-v"):
        return nu_cf(p, stream, o["depth"] or 200, o["replications"],
                     side="u" if method == "cf" else "v")
    if method == "ratio":
        return nu_via_ratio(p, stream, o["depth"] or 60, o["replications"])
    if method == "boundary":
        raise UsageError(f"method 'boundary' needs a boundary policy, got {p}")
    if method == "gig":
        if not isinstance(stream, GammaStream) or p.lam != p.theta:
            raise UsageError("method 'gig' needs a gamma stream and lambda = theta")
        return nu_gig_diagonal(stream.spec, p.lam, o["mc_budget"], seed=stream.seed)
    raise UsageError(f"unknown method {method!r}")


def cmd_estimate(args, cp):
    stream = _stream(args, cp)
    pols = _policies(args, cp)
    cfg = _section(cp, "estimate")
    methods = _methods(args, cfg)
    o = {"rel_tol": _opt(args, cfg, "rel_tol", float, 1e-3),
         "max_iter": _opt(args, cfg, "max_iter", int, 10**6),
         "min_iter": _opt(args, cfg, "min_iter", int, 1000),
         "reps": _opt(args, cfg, "reps", int, 30),
         "iters": _opt(args, cfg, "iters", int, 20),
         "depth": _opt(args, cfg, "depth", int, None),
         "replications": _opt(args, cfg, "replications", int, 10**5),
         "mc_budget": _opt(args, cfg, "mc_budget", int, 10**6)}
    rows = []
    for p in pols:
        for m in methods:
            try:
                e = _estimate_one(p, m, stream, o)
            except ValueError as exc:
                raise UsageError(str(exc))
            rows.append((p.lam, p.theta, e.method, e.value, e.cert_type, e.cert_value,
                         e.stderr, e.bound, e.iterations, stream.seed))
    _write_table(_output(args, cp), "estimate", ESTIMATE_COLUMNS, rows)
    return 0


def _grid_opts(args, cp):
    cfg = _section(cp, "grid")
    return {"resolution": _opt(args, cfg, "resolution", int, 50),
            "rel_tol": _opt(args, cfg, "rel_tol", float, 1e-3),
            "estimator": _opt(args, cfg, "estimator", str, "direct"),
            "reps": _opt(args, cfg, "reps", int, 30),
            "min_iter": _opt(args, cfg, "min_iter", int, 5000),
            "max_iter": _opt(args, cfg, "max_iter", int, 10**6),
            "n_iter": _opt(args, cfg, "iters", int, 30)}


def _run_grid(args, cp, refine):
    stream = _stream(args, cp)
    o = _grid_opts(args, cp)
    if o["estimator"] not in ("direct", "transfer"):
        raise UsageError(f"grid estimator must be direct or transfer, got {o['estimator']!r}")
    try:
        g = grid_search(stream, refine=refine, **o)
    except ValueError as exc:
        raise UsageError(str(exc))
    return stream, g


def _heatmap_rows(g):
    for lam, th, nu, cert, iters, conv in g.rows():
        flags = []
        if nu < 0:
            flags.append("negative")
        if not conv:
            flags.append("nonconverged")
        yield lam, th, nu, cert, iters, ";".join(flags)


def _summary(g, stream):
    lines = [f"stream = {stream.describe()}",
             f"resolution = {g.resolution}",
             f"estimator = {g.method}",
             f"cell_argmax = {g.cell_argmax.lam!r}, {g.cell_argmax.theta!r}",
             f"cell_max = {g.cell_max!r}",
             f"argmax = {g.argmax.lam!r}, {g.argmax.theta!r}",
             f"argmax_value = {g.argmax_estimate.value!r}",
             f"argmax_cert = {g.argmax_estimate.error(3)!r}",
             f"boundary_edge = {g.boundary_max.edge}",
             f"boundary_policy = {g.boundary_max.policy.lam!r}, {g.boundary_max.policy.theta!r}",
             f"boundary_value = {g.boundary_max.value!r}",
             f"verdict = {g.kelly.verdict}",
             f"margin = {g.kelly.margin!r}"]
    return "\n".join(lines) + "\n"


def _plot(g, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    vals = np.where(g.values < 0, np.nan, g.values)   # negative cells left blank
    im = ax.pcolormesh(g.thetas, g.lams, vals, shading="nearest")
    ax.plot(g.argmax.theta, g.argmax.lam, "r+")
    ax.set_xlabel("theta")
    ax.set_ylabel("lambda")
    fig.colorbar(im, ax=ax, label="nu")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def cmd_heatmap(args, cp):
    stream, g = _run_grid(args, cp, refine=False)
    _write_table(_output(args, cp), "heatmap", HEATMAP_COLUMNS, _heatmap_rows(g))
    plot = args.plot or _section(cp, "output").get("plot")
    if plot:
        _plot(g, plot)
    sys.stderr.write(_summary(g, stream))
    return 0


def cmd_optimize(args, cp):
    stream, g = _run_grid(args, cp, refine=True)
    out = _output(args, cp)
    if out:
        _write_table(out, "heatmap", HEATMAP_COLUMNS, _heatmap_rows(g))
    m = env_moments(stream, None if stream.finite or isinstance(stream, GammaStream) else 10**5)
    reg = classify_regime(m)
    text = _summary(g, stream) + f"regime = {reg.tag}\nboundary_case = {reg.boundary_case}\n"
    sys.stdout.write(text)
    return 0


def cmd_bounds(args, cp):
    stream = _stream(args, cp)
    pols = _policies(args, cp)
    budget = _opt(args, _section(cp, "estimate"), "mc_budget", int, 10**6)
    rows = []
    for p in pols:
        try:
            rep = bnd.bounds_report(p, stream, budget)
        except ValueError as exc:
            raise UsageError(str(exc))
        for name, val, se in rep.entries():
            ctype, cval = ("stderr", se) if se else ("none", 0.0)
            rows.append((p.lam, p.theta, f"bound:{name}", val, ctype, cval, se or None, None,
                         1 if not se else budget, stream.seed))
        if stream.finite and stream.iid:
            e = nu_transfer(p, stream, 40)
        else:
            e = nu_direct(p, stream.clone(), min_iter=20000, strict=False)
        rows.append((p.lam, p.theta, e.method, e.value, e.cert_type, e.cert_value, e.stderr,
                     e.bound, e.iterations, stream.seed))
    _write_table(_output(args, cp), "estimate", ESTIMATE_COLUMNS, rows)
    return 0


def cmd_meanfield(args, cp):
    cfg = _section(cp, "meanfield")
    pols = _policies(args, cp)
    alpha = _opt(args, cfg, "alpha", float, None)
    beta = _opt(args, cfg, "beta", float, None)
    if alpha is None or beta is None:
        m = env_moments(_stream(args, cp), 10**5)
        alpha, beta, gamma = m.alpha, m.beta, m.gamma
    else:
        gamma = _opt(args, cfg, "gamma", float, None)
    spec = MeanSpec(alpha, beta, gamma)
    u0 = _opt(args, cfg, "u0", float, 1.0)
    v0 = _opt(args, cfg, "v0", float, 0.0)
    steps = _opt(args, cfg, "steps", int, 20)
    rows, notes = [], []
    for p in pols:
        traj = mean_trajectory(p, spec, u0, v0, steps)
        for k, (u, v) in enumerate(traj):
            rows.append((k, u, v, alpha * u + v))
        ab = None if abs(spec.gamma - alpha * beta) < 1e-15 else alpha * beta
        notes.append(f"policy = {p.lam!r}, {p.theta!r}")
        notes.append(f"mu = {mu(p, spec.gamma, ab)!r}")
        notes.append(f"mu_swapped = {mu(p.swapped(), spec.gamma, ab)!r}")
        if p.interior:
            notes.append(f"gradient_signs = {mu_gradient_signs(p, spec.gamma)}")
        if abs(spec.gamma - 1) <= 1e-12 and abs(alpha * beta - 1) <= 1e-12:
            lim = gamma_one_limits(p, spec, u0, v0)
            notes.append(f"limits = {lim.u_inf!r}, {lim.v_inf!r}; trend = {lim.trend}")
    _write_table(_output(args, cp), "meanfield", MEANFIELD_COLUMNS, rows)
    sys.stderr.write("\n".join(notes) + "\n")
    return 0


def cmd_verify(args, cp):
    from .verify import run_checks

    seed = args.seed if args.seed is not None else int(os.environ.get(SEED_ENV, DEFAULT_SEED))
    checks = run_checks(full=args.full, mc_budget=args.mc_budget, seed=seed)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} passed")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# parser


def _add_stream(p):
    g = p.add_argument_group("stream")
    g.add_argument("--model", help="bern | gamma-gig | markov")
    g.add_argument("--eps", type=float, help="low value of epsilon (bern, markov)")
    g.add_argument("--delta", type=float, help="low value of delta (bern, markov)")
    g.add_argument("--eta", type=float, help="common high value (bern, markov)")
    g.add_argument("--h", type=float, help="gamma shape")
    g.add_argument("--r", type=float, help="rate of epsilon (scale 2/r)")
    g.add_argument("--s", type=float, help="rate of delta (scale 2/s)")
    g.add_argument("--stay", type=float, help="regime persistence (markov)")


def _add_policy(p):
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--policies", help="comma-separated lam:theta pairs")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="artcollector", description=__doc__,
                                 epilog=COLUMN_HELP,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", help="INI-style config file")
    ap.add_argument("--seed", type=int,
                    help=f"random seed (default: ${SEED_ENV} or {DEFAULT_SEED})")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, epilog=COLUMN_HELP,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", default=argparse.SUPPRESS, help="INI-style config file")
        sp.add_argument("--seed", type=int, default=argparse.SUPPRESS)
        return sp

    e = add("estimate", "estimate nu at one or more policies")
    _add_stream(e)
    _add_policy(e)
    e.add_argument("--method", help=f"comma-separated list from {', '.join(METHODS)}")
    e.add_argument("--iters", type=int, help="transfer-operator iterations")
    e.add_argument("--rel-tol", dest="rel_tol", type=float)
    e.add_argument("--min-iter", dest="min_iter", type=int)
    e.add_argument("--max-iter", dest="max_iter", type=int)
    e.add_argument("--reps", type=int)
    e.add_argument("--depth", type=int, help="continued-fraction (default 200) or ratio (default 60) depth")
    e.add_argument("--replications", type=int)
    e.add_argument("--mc-budget", dest="mc_budget", type=int)
    e.add_argument("--out", help="CSV path (default stdout)")

    for name, help_ in (("heatmap", "sweep nu over the interior grid i/(N+1)"),
                        ("optimize", "grid sweep, local refinement and Kelly-effect test")):
        h = add(name, help_)
        _add_stream(h)
        h.add_argument("--resolution", type=int)
        h.add_argument("--estimator", help="direct | transfer")
        h.add_argument("--rel-tol", dest="rel_tol", type=float)
        h.add_argument("--reps", type=int)
        h.add_argument("--min-iter", dest="min_iter", type=int)
        h.add_argument("--max-iter", dest="max_iter", type=int)
        h.add_argument("--iters", type=int, help="transfer iterations per cell")
        h.add_argument("--out", help="CSV path (default stdout for heatmap)")
        if name == "heatmap":
            h.add_argument("--plot", help="optional PNG path")

    b = add("bounds", "table of analytic bounds with a reference estimate")
    _add_stream(b)
    _add_policy(b)
    b.add_argument("--mc-budget", dest="mc_budget", type=int)
    b.add_argument("--out")

    m = add("meanfield", "mean-field trajectory, mu, gradient signs")
    _add_stream(m)
    _add_policy(m)
    m.add_argument("--alpha", type=float)
    m.add_argument("--beta", type=float)
    m.add_argument("--gamma", type=float)
    m.add_argument("--u0", type=float)
    m.add_argument("--v0", type=float)
    m.add_argument("--steps", type=int)
    m.add_argument("--out")

    v = add("verify-paper", "check published reference values (exit 1 on any FAIL)")
    v.add_argument("--full", action="store_true", help="include the 50x50 grid sweep")
    v.add_argument("--mc-budget", dest="mc_budget", type=int, default=4 * 10**6)
    return ap


COMMANDS = {"estimate": cmd_estimate, "heatmap": cmd_heatmap, "optimize": cmd_optimize,
            "bounds": cmd_bounds, "meanfield": cmd_meanfield, "verify-paper": cmd_verify}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cp = _load_config(getattr(args, "config", None))
        return COMMANDS[args.command](args, cp)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"artcollector: error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"artcollector: numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
