"""CSV, manifest and SVG emitters for simulation tables and figures."""
from __future__ import annotations

import csv
import math
import os
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig
from .dgp import make_scenario
from .montecarlo import mean_and_se, run_experiment, run_reps, spec_key
from .stats import beta_cdf, beta_pdf, kde, kernel_smoothed, silverman_bandwidth, survival_curve

SVG_W, SVG_H = 800, 600
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
FIG1A_NS = tuple(range(100, 2001, 100))
FIG1B_NS = (100, 1000, 2000)
FIG2_Z = tuple(round(1.01 + 0.01 * i, 2) for i in range(400))
TIE_TOL = 1e-9


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory {path!r} is not writable")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_cell(v) for v in row])


def write_summary(table, path):
    cols = table.COLUMNS
    write_csv(path, cols, ([row[c] for c in cols] for row in table.rows))


def write_samples(outcomes, path):
    first = outcomes[0]
    loss_keys = list(first.loss_ratio)
    risk_keys = list(first.risk_ratio)
    set_keys = list(first.set_inf_at_true)
    header = (
        ["rep"]
        + [f"loss_ratio_{k}" for k in loss_keys]
        + [f"risk_ratio_{k}" for k in risk_keys]
        + ["wL_equals_true", "inf_over_true_loss"]
        + [f"inf_at_true_{k}" for k in set_keys]
    )
    rows = (
        [o.rep_index]
        + [o.loss_ratio[k] for k in loss_keys]
        + [o.risk_ratio[k] for k in risk_keys]
        + [o.wL_equals_true, o.loss_ratio_optimal_inverse]
        + [o.set_inf_at_true[k] for k in set_keys]
        for o in outcomes
    )
    write_csv(path, header, rows)


def write_manifest(config: ExperimentConfig, path, extra=()):
    """The config itself plus provenance comments; loadable as a config file."""
    lines = [f"# version {__version__}", f"# config-hash {config.hash()}"]
    lines += [f"# {line}" for line in extra]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n" + config.to_text())


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# svg ------------------------------------------------------------------------

def _ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / count for i in range(count + 1)]


def _panel_svg(panel, top, height):
    """One set of axes occupying the horizontal band ``[top, top + height]``."""
    left, right = 80, SVG_W - 30
    ptop, pbottom = top + 35, top + height - 45
    series = panel["series"]
    xs = np.concatenate([np.asarray(s["x"], float) for s in series])
    ys = np.concatenate([np.asarray(s["y"], float) for s in series])
    ok = np.isfinite(ys)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = panel.get("ylim", (float(ys[ok].min()), float(ys[ok].max())))
    if y1 <= y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    if x1 <= x0:
        x0, x1 = x0 - 0.5, x1 + 0.5

    def sx(x):
        return left + (x - x0) / (x1 - x0) * (right - left)

    def sy(y):
        return pbottom - (min(max(y, y0), y1) - y0) / (y1 - y0) * (pbottom - ptop)

    out = [
        f'<text x="{SVG_W / 2}" y="{top + 20}" text-anchor="middle" font-size="15">{escape(panel["title"])}</text>',
        f'<rect x="{left}" y="{ptop}" width="{right - left}" height="{pbottom - ptop}" fill="none" stroke="#000"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<text x="{sx(t):.1f}" y="{pbottom + 16}" text-anchor="middle" font-size="11">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{left - 6}" y="{sy(t) + 4:.1f}" text-anchor="end" font-size="11">{t:.4g}</text>')
    out.append(
        f'<text x="{(left + right) / 2}" y="{pbottom + 34}" text-anchor="middle" font-size="12">{escape(panel["xlabel"])}</text>'
    )
    out.append(
        f'<text x="18" y="{(ptop + pbottom) / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {(ptop + pbottom) / 2})">{escape(panel["ylabel"])}</text>'
    )
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(
            f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(s["x"], s["y"]) if math.isfinite(y)
        )
        dash = ' stroke-dasharray="6,4"' if s.get("dashed") else ""
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{pts}"/>')
        ly = ptop + 14 + 15 * i
        out.append(f'<line x1="{right - 190}" y1="{ly - 4}" x2="{right - 165}" y2="{ly - 4}" stroke="{color}"{dash}/>')
        out.append(f'<text x="{right - 160}" y="{ly}" font-size="11">{escape(s["label"])}</text>')
    return out


def write_svg(path, panels):
    """Static 800x600 plot; several panels are stacked vertically."""
    height = SVG_H / len(panels)
    body = []
    for i, panel in enumerate(panels):
        body += _panel_svg(panel, i * height, height)
    with open(path, "w") as fh:
        fh.write(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" '
            f'viewBox="0 0 {SVG_W} {SVG_H}" font-family="sans-serif">\n'
            f'<rect width="{SVG_W}" height="{SVG_H}" fill="#fff"/>\n'
        )
        fh.write("\n".join(body))
        fh.write("\n</svg>\n")


# simulate -------------------------------------------------------------------

def simulate(config: ExperimentConfig):
    """Run the configured grid and write summary, per-rep samples and manifest."""
    config.validate()
    _ensure_dir(config.out)
    result = run_experiment(
        config.specs(), config.reps, config.seed, config.threads, config.phi, config.weight_sets
    )
    write_summary(result.summary, os.path.join(config.out, "summary.csv"))
    for key, outcomes in result.samples.items():
        write_samples(outcomes, os.path.join(config.out, f"samples_{key}.csv"))
    write_manifest(config, os.path.join(config.out, "manifest.txt"), ["command simulate"])
    return result


# figures --------------------------------------------------------------------

def _require(config, scenario, rho=None):
    problems = []
    if config.scenario != scenario:
        problems.append(f"scenario: figure needs {scenario!r}, got {config.scenario!r}")
    if rho is not None and config.rho != rho:
        problems.append(f"rho: figure needs rho = {rho}, got {config.rho}")
    if problems:
        raise ConfigError(problems)


def fig1a_data(reps, seed, threads=1, ns=FIG1A_NS):
    """Rows ``(n, Pr(w^L = w_2^0), mc_se)`` for the toy design."""
    rows = []
    for n in ns:
        out = run_reps(make_scenario("toy", n), reps, seed, threads, phis=())
        p, se = mean_and_se([float(o.wL_equals_true) for o in out])
        rows.append((n, p, se))
    return rows


def tie_free(values):
    """Drop exact ties at 1 (up to floating-point tolerance)."""
    x = np.asarray(values, dtype=float)
    return x[np.abs(x - 1.0) >= TIE_TOL]


def fig1b_data(reps, seed, threads=1, ns=FIG1B_NS, grid=None):
    """KDE of ``L(w^L) / L(w_2^0)`` (ties at 1 removed) for each n.

    Returns ``(grid, curves, bandwidths, beta_density, smoothed)`` where
    ``smoothed[n]`` is the Beta(1/2, 1/2) law blurred by the same kernel.
    """
    if grid is None:
        grid = np.round(np.linspace(0.01, 0.99, 99), 10)
    curves, bws, smoothed = {}, {}, {}
    for n in ns:
        out = run_reps(make_scenario("toy", n), reps, seed, threads, phis=())
        x = tie_free([o.loss_ratio_optimal_inverse for o in out])
        h = silverman_bandwidth(x)
        curves[n] = kde(x, grid, h)
        bws[n] = h
        smoothed[n] = kernel_smoothed(lambda u: beta_cdf(0.5, 0.5, u), grid, h)
    return grid, curves, bws, beta_pdf(0.5, 0.5, grid), smoothed


def fig2_reference(z, k=2):
    """``Pr{Beta(1/2, k/2) >= 1 - 1/z} / 2``."""
    return 0.5 * (1.0 - beta_cdf(0.5, k / 2.0, 1.0 - 1.0 / z))


def fig2_data(specs, reps, seed, threads=1, z_grid=FIG2_Z):
    """Survival curves of ``L(w_true)/inf L`` and ``L(w_logn)/inf L`` per spec."""
    z = np.asarray(z_grid, dtype=float)
    curves = {}
    for spec in specs:
        out = run_reps(spec, reps, seed, threads, phis=("logn",))
        for est in ("true", "logn"):
            s = survival_curve([o.loss_ratio[est] for o in out], z)
            curves[(spec_key(spec), est)] = (s, np.sqrt(s * (1 - s) / len(out)))
    k0 = specs[0].K[specs[0].M0 - 1]
    ref = np.array([fig2_reference(v, k0) for v in z])
    return z, ref, curves


def figure(config: ExperimentConfig, which):
    """Write ``<which>.csv`` and ``<which>.svg`` into ``config.out``."""
    if which not in ("fig1a", "fig1b", "fig2"):
        raise ValueError(f"unknown figure {which!r}")
    if which == "fig2":
        _require(config, "fixed", rho=0.0)
    else:
        _require(config, "toy")
    config.validate()
    _ensure_dir(config.out)
    base = os.path.join(config.out, which)

    if which == "fig1a":
        rows = fig1a_data(config.reps, config.seed, config.threads)
        write_csv(base + ".csv", ("n", "prob_wL_equals_true", "mc_se"), rows)
        ns = [r[0] for r in rows]
        write_svg(base + ".svg", [{
            "title": "Pr(w^L = w_2^0), toy design",
            "xlabel": "n", "ylabel": "probability", "ylim": (0.0, 1.0),
            "series": [
                {"label": "simulated", "x": ns, "y": [r[1] for r in rows]},
                {"label": "1/2", "x": ns, "y": [0.5] * len(ns), "dashed": True},
            ],
        }])
        result = rows
    elif which == "fig1b":
        grid, curves, bws, dens, smoothed = fig1b_data(config.reps, config.seed, config.threads)
        ns = list(curves)
        header = ["x"] + [f"kde_n{n}" for n in ns] + ["beta_density"] + [f"smoothed_beta_n{n}" for n in ns]
        rows = [
            [float(g)] + [float(curves[n][i]) for n in ns] + [float(dens[i])] + [float(smoothed[n][i]) for n in ns]
            for i, g in enumerate(grid)
        ]
        write_csv(base + ".csv", header, rows)
        series = [{"label": f"KDE n={n} (h={bws[n]:.3f})", "x": grid, "y": curves[n]} for n in ns]
        series.append({"label": "Beta(1/2,1/2) density", "x": grid, "y": dens, "dashed": True})
        write_svg(base + ".svg", [{
            "title": "Density of L(w^L)/L(w_2^0), ties at 1 removed",
            "xlabel": "ratio", "ylabel": "density", "ylim": (0.0, 3.5), "series": series,
        }])
        result = (grid, curves, bws, dens, smoothed)
    else:
        z, ref, curves = fig2_data(config.specs(), config.reps, config.seed, config.threads)
        keys = list(dict.fromkeys(k for k, _ in curves))
        header = ["z", "reference"]
        for key in keys:
            header += [f"{key}_true", f"{key}_true_se", f"{key}_logn", f"{key}_logn_se"]
        rows = []
        for i, zi in enumerate(z):
            row = [float(zi), float(ref[i])]
            for key in keys:
                for est in ("true", "logn"):
                    s, se = curves[(key, est)]
                    row += [float(s[i]), float(se[i])]
            rows.append(row)
        write_csv(base + ".csv", header, rows)
        panels = []
        for est, name in (("true", "true model"), ("logn", "phi = log n")):
            series = [{"label": key, "x": z, "y": curves[(key, est)][0]} for key in keys]
            series.append({"label": "reference bound", "x": z, "y": ref, "dashed": True})
            panels.append({
                "title": f"Pr(L_n / inf L_n >= z), {name}",
                "xlabel": "z", "ylabel": "probability", "ylim": (0.0, 1.0), "series": series,
            })
        write_svg(base + ".svg", panels)
        result = (z, ref, curves)
    write_manifest(config, os.path.join(config.out, "manifest.txt"), [f"command figures {which}"])
    return result
