"""Reproduce the simulation tables and figures from the configs in scripts/configs.

    python scripts/reproduce.py table2 --desk
    python scripts/reproduce.py fig2 --threads 8

``--desk`` drops sample sizes above 10000 and runs 1000 replications, which
finishes in minutes on a laptop.  Without it the full grids can take hours.
"""
import argparse
import os
import sys
import time

from nestedavg import report
from nestedavg.config import load_config

HERE = os.path.dirname(os.path.abspath(__file__))
TARGETS = ("table2", "table3", "table4", "restricted_sets", "fig1a", "fig1b", "fig2")
CONFIG = {"fig1a": "fig1", "fig1b": "fig1"}


def desk(cfg):
    n = tuple(v for v in cfg.n if v <= 10_000) or (min(cfg.n),)
    return cfg.updated(n=" ".join(map(str, n)), reps="1000", full="false", out=cfg.out + "_desk")


def print_table(summary):
    """Loss and risk ratios side by side, one line per (r2, n)."""
    ests = ("true", "mma", "logn")
    print(f"{'r2':>5} {'n':>7} | " + " ".join(f"L:{e:>6}" for e in ests) + " | " + " ".join(f"R:{e:>6}" for e in ests))
    keys = list(dict.fromkeys((r["r2"], r["n"]) for r in summary.rows))
    for r2, n in keys:
        cells = []
        for metric in ("loss_ratio", "risk_ratio"):
            for e in ests:
                try:
                    cells.append(f"{summary.get(r2=r2, n=n, estimator=e, metric=metric)['mean']:8.3f}")
                except KeyError:
                    cells.append(f"{'-':>8}")
        r2s = "-" if r2 is None else f"{r2:g}"
        print(f"{r2s:>5} {n:>7} | " + " ".join(cells[:3]) + " | " + " ".join(cells[3:]))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("target", choices=TARGETS)
    p.add_argument("--desk", action="store_true", help="smaller n and reps")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", help="override the output directory")
    args = p.parse_args(argv)

    cfg = load_config(os.path.join(HERE, "configs", CONFIG.get(args.target, args.target) + ".txt"))
    if args.desk:
        cfg = desk(cfg)
    cfg = cfg.updated(threads=str(args.threads), **({"out": args.out} if args.out else {}))

    t0 = time.perf_counter()
    if args.target.startswith("fig"):
        report.figure(cfg, args.target)
    else:
        res = report.simulate(cfg)
        print_table(res.summary)
        for row in res.summary.rows:
            if row["metric"] == "inf_at_true":
                print(f"inf over {row['estimator']} at the true model: {row['mean']:.3f} (se {row['mc_se']:.3f})")
    print(f"{args.target}: wrote {cfg.out} in {time.perf_counter() - t0:.1f}s", file=sys.stderr)


if __name__ == "__main__":
    main()
