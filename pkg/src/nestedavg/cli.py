"""Command line: ``nestedavg {simulate,figures,verify,solve,export}``."""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .dgp import generate, make_scenario
from .errors import CapacityError, RankDeficiencyError, SolverError
from .montecarlo import parse_weight_set, phi_value
from .objectives import Discrete, Simplex, build_criterion
from .projection import check_sizes, factorize, coords, increments, sigma_hat
from .report import read_csv, write_csv
from .solver import solve_discrete, solve_restricted, solve_simplex
from . import report, verify


def _add_experiment_flags(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--scenario", choices=("toy", "fixed", "div1", "div2"))
    p.add_argument("--n", nargs="+", type=int)
    p.add_argument("--r2", nargs="+", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--phi", nargs="+")
    p.add_argument("--weight-set", nargs="+", dest="weight_sets")
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.add_argument("--full", action="store_true", default=None, help="lift the desk-scale caps on n and reps")


def experiment_config(args):
    """File settings (or defaults) with command-line flags on top."""
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {}
    for key in ("scenario", "rho", "reps", "seed", "threads", "out", "full"):
        val = getattr(args, key)
        if val is not None:
            over[key] = val if isinstance(val, bool) else str(val)
    for key in ("n", "r2", "phi", "weight_sets"):
        val = getattr(args, key)
        if val is not None:
            over[key] = " ".join(str(v) for v in val)
    if over.get("scenario") == "toy" and "r2" not in over:
        over["r2"] = ""
    return cfg.updated(**over)


def _read_matrix(path):
    rows = read_csv(path)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    cols = list(rows[0])
    return np.array([[float(r[c]) for c in cols] for r in rows]), cols


def _parse_sizes(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def cmd_simulate(args):
    cfg = experiment_config(args)
    result = report.simulate(cfg)
    for row in result.summary.rows:
        print(
            f"{row['scenario']:>6} r2={row['r2']!s:<5} n={row['n']:<6} {row['estimator']:<28}"
            f" {row['metric']:<18} {row['mean']:.4f} (se {row['mc_se']:.4f})"
        )
    print(f"wrote {cfg.out}")
    return 0


def cmd_figures(args):
    cfg = experiment_config(args)
    report.figure(cfg, args.figure)
    print(f"wrote {os.path.join(cfg.out, args.figure)}.csv/.svg")
    return 0


def cmd_verify(args):
    results = verify.run_all(seed=args.seed, fault=args.inject_fault, scale=args.scale)
    print(verify.format_report(results))
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "FAILED")
    return 0 if ok else 1


def solve_data(X, y, K, phi="mma", weight_set="simplex", m0=None):
    """Weights chosen by the criterion for one data set, plus per-model summaries."""
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError(f"design has {X.shape[0]} rows but response has {y.size}")
    K = check_sizes(K, X.shape[0])
    design = factorize(X, K)
    c_y = coords(design, y)
    s2 = sigma_hat(design, c_y)
    crit = build_criterion(design, c_y, phi_value(phi, design.n), s2)
    ws = parse_weight_set(weight_set)
    if isinstance(ws, Simplex):
        rep = solve_simplex(crit)
    elif isinstance(ws, Discrete):
        rep = solve_discrete(crit, ws.N)
    else:
        if m0 is None:
            raise ValueError("the restricted weight set needs --m0")
        rep = solve_restricted(crit, ws[1], ws[2], m0, design.n)
    a = np.cumsum(increments(design, c_y))
    return rep, s2, a, design.K


def cmd_solve(args):
    X, _ = _read_matrix(args.design)
    Y, _ = _read_matrix(args.response)
    if Y.shape[1] != 1:
        raise ValueError(f"{args.response}: expected a single column, got {Y.shape[1]}")
    rep, s2, a, K = solve_data(X, Y[:, 0], _parse_sizes(args.K), args.phi, args.weight_set, args.m0)
    rows = [(m + 1, int(K[m]), float(a[m]), float(rep.weights[m])) for m in range(K.size)]
    header = ("model", "k", "a", "weight")
    if args.out:
        write_csv(args.out, header, rows)
    print(f"G_n = {rep.objective_value!r}")
    print(f"sigma2_hat = {s2!r}")
    print(",".join(header))
    for r in rows:
        print(f"{r[0]},{r[1]},{r[2]!r},{r[3]!r}")
    return 0


def cmd_export(args):
    r2 = None if args.scenario == "toy" else args.r2
    spec = make_scenario(args.scenario, args.n, r2)
    data = generate(spec, args.rep, args.seed)
    os.makedirs(args.out, exist_ok=True)
    write_csv(
        os.path.join(args.out, "design.csv"),
        [f"x{j + 1}" for j in range(data.X.shape[1])],
        (list(map(float, row)) for row in data.X),
    )
    write_csv(os.path.join(args.out, "response.csv"), ["y"], ([float(v)] for v in data.y))
    with open(os.path.join(args.out, "K.txt"), "w") as fh:
        fh.write(" ".join(str(k) for k in spec.K) + "\n")
    print(f"wrote {args.out}: n={spec.n}, K={' '.join(map(str, spec.K))}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="nestedavg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run replications and write summary tables")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("figures", help="write figure data (CSV) and static SVG")
    p.add_argument("figure", choices=("fig1a", "fig1b", "fig2"))
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("verify", help="seeded self-check of solvers and identities")
    p.add_argument("--seed", type=int, default=20240101)
    p.add_argument("--scale", type=float, default=1.0, help="fraction of the default instance counts")
    p.add_argument("--inject-fault", choices=("flip_A",), default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("solve", help="choose weights for a design/response pair")
    p.add_argument("--design", required=True, help="CSV with a header row, one column per covariate")
    p.add_argument("--response", required=True, help="CSV with a header row and one column")
    p.add_argument("--K", required=True, help="nested model sizes, e.g. '1 2 3' or '1,2,3'")
    p.add_argument("--phi", default="mma")
    p.add_argument("--weight-set", default="simplex")
    p.add_argument("--m0", type=int, help="number of under-fitted models (restricted set only)")
    p.add_argument("--out", help="write the weight table here as well")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("export", help="write one simulated data set as CSV")
    p.add_argument("--scenario", default="toy", choices=("toy", "fixed", "div1", "div2"))
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--r2", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=20240101)
    p.add_argument("--rep", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, RankDeficiencyError, CapacityError, SolverError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
