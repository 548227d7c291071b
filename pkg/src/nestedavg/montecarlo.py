"""Replicated experiments: weights, loss/risk ratios, and their summaries."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dgp import ScenarioSpec, generate
from .errors import RepFailure
from .objectives import (
    Discrete,
    Restricted,
    Simplex,
    build_criterion,
    build_loss,
    build_risk,
)
from .projection import factorize_with_coords, sigma_hat
from .solver import solve_discrete, solve_restricted, solve_simplex

RATIO_FLOOR = 1e-10


def phi_value(label, n):
    """Penalty factor for ``"mma"`` (2), ``"logn"`` (natural log) or a number."""
    if label == "mma":
        return 2.0
    if label == "logn":
        return math.log(n)
    value = float(label)
    if not value > 0:
        raise ValueError(f"penalty factor must be positive, got {label!r}")
    return value


def parse_weight_set(text):
    """``simplex``, ``discrete:N`` or ``restricted:delta,tau0``."""
    if isinstance(text, (Simplex, Discrete)) or isinstance(text, tuple):
        return text
    text = text.strip()
    if text == "simplex":
        return Simplex()
    kind, _, arg = text.partition(":")
    if kind == "discrete":
        N = int(arg)
        if N < 1:
            raise ValueError("discrete weight set needs N >= 1")
        return Discrete(N)
    if kind == "restricted":
        delta, tau0 = (float(v) for v in arg.split(","))
        if not (delta > 0 and tau0 > 0):
            raise ValueError("restricted weight set needs delta > 0 and tau0 > 0")
        return ("restricted", delta, tau0)
    raise ValueError(f"unknown weight set {text!r}")


def weight_set_label(ws):
    if isinstance(ws, tuple):
        return f"restricted:{ws[1]:g},{ws[2]:g}"
    return str(ws)


def _solve_over(obj, ws, M0, n):
    if isinstance(ws, Simplex):
        return solve_simplex(obj)
    if isinstance(ws, Discrete):
        return solve_discrete(obj, ws.N)
    return solve_restricted(obj, ws[1], ws[2], M0, n)


@dataclass
class RepOutcome:
    rep_index: int
    loss_ratio: dict
    risk_ratio: dict
    wL_equals_true: bool
    loss_ratio_optimal_inverse: float
    set_inf_at_true: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)

    @property
    def loss_ratio_true(self):
        return self.loss_ratio["true"]

    @property
    def loss_ratio_mma(self):
        return self.loss_ratio["mma"]

    @property
    def loss_ratio_logn(self):
        return self.loss_ratio["logn"]

    @property
    def risk_ratio_true(self):
        return self.risk_ratio["true"]

    @property
    def risk_ratio_mma(self):
        return self.risk_ratio["mma"]

    @property
    def risk_ratio_logn(self):
        return self.risk_ratio["logn"]

    @property
    def discrete_inf_at_true(self):
        for key, val in self.set_inf_at_true.items():
            if key.startswith("discrete"):
                return val
        return None


def _ratio(num, den):
    if den <= 0:
        return 1.0 if num <= 0 else math.inf
    return num / den


def run_rep(spec: ScenarioSpec, rep_index, master_seed, phis=("mma", "logn"), weight_sets=("simplex",)):
    data = generate(spec, rep_index, master_seed)
    design, (c_y, c_mu) = factorize_with_coords(data.X, spec.K, data.y, data.mu)
    s2 = sigma_hat(design, c_y)
    true_idx = spec.M0 + 1
    sets = [parse_weight_set(ws) for ws in weight_sets]

    loss = build_loss(design, c_y, c_mu)
    risk = build_risk(design, c_mu, data.sigma2)
    sol_L = solve_simplex(loss)
    inf_L = sol_L.objective_value
    inf_R = solve_simplex(risk).objective_value
    L_true = float(loss.vertex_values()[true_idx - 1])
    R_true = float(risk.vertex_values()[true_idx - 1])

    loss_ratio = {"true": _ratio(L_true, inf_L)}
    risk_ratio = {"true": _ratio(R_true, inf_R)}
    weights = {"wL": sol_L.weights}
    for label in phis:
        crit = build_criterion(design, c_y, phi_value(label, spec.n), s2)
        for ws in sets:
            key = label if isinstance(ws, Simplex) else f"{label}@{weight_set_label(ws)}"
            w = _solve_over(crit, ws, spec.M0, spec.n).weights
            weights[key] = w
            loss_ratio[key] = _ratio(float(loss(w)), inf_L)
            risk_ratio[key] = _ratio(float(risk(w)), inf_R)

    unit = np.zeros(spec.M)
    unit[true_idx - 1] = 1.0
    set_inf = {}
    for ws in sets:
        if isinstance(ws, Simplex):
            continue
        w = _solve_over(loss, ws, spec.M0, spec.n).weights
        set_inf[weight_set_label(ws)] = bool(np.max(np.abs(w - unit)) <= 1e-10)
    return RepOutcome(
        rep_index=rep_index,
        loss_ratio=loss_ratio,
        risk_ratio=risk_ratio,
        wL_equals_true=bool(np.max(np.abs(sol_L.weights - unit)) <= 1e-10),
        loss_ratio_optimal_inverse=_ratio(inf_L, L_true),
        set_inf_at_true=set_inf,
        weights=weights,
    )


def run_reps(spec, reps, master_seed, threads=1, phis=("mma", "logn"), weight_sets=("simplex",)):
    """All replications of one scenario, returned in rep-index order."""
    if reps < 1:
        raise ValueError("reps must be >= 1")

    def task(r):
        try:
            return run_rep(spec, r, master_seed, phis, weight_sets)
        except Exception as exc:  # annotate and re-raise
            raise RepFailure(r, exc) from exc

    if threads <= 1:
        return [task(r) for r in range(reps)]
    pool = ThreadPoolExecutor(max_workers=threads)
    try:
        out = list(pool.map(task, range(reps)))
    except RepFailure:
        pool.shutdown(wait=False, cancel_futures=True)
        raise
    pool.shutdown()
    return out


def spec_key(spec):
    r2 = "na" if spec.r2 is None else f"{spec.r2:g}"
    return f"{spec.name}_r2-{r2}_n-{spec.n}"


def mean_and_se(values):
    x = np.asarray(values, dtype=float)
    total = 0.0
    for v in x:  # rep-index order, independent of scheduling
        total += v
    mean = total / x.size
    if x.size < 2:
        return mean, 0.0
    var = 0.0
    for v in x:
        var += (v - mean) ** 2
    return mean, math.sqrt(var / (x.size - 1) / x.size)


@dataclass
class SummaryTable:
    rows: list

    COLUMNS = ("scenario", "r2", "n", "estimator", "metric", "mean", "mc_se", "reps")

    def get(self, scenario=None, r2=None, n=None, estimator=None, metric=None):
        for row in self.rows:
            if (
                (scenario is None or row["scenario"] == scenario)
                and (r2 is None or row["r2"] == r2)
                and (n is None or row["n"] == n)
                and (estimator is None or row["estimator"] == estimator)
                and (metric is None or row["metric"] == metric)
            ):
                return row
        raise KeyError((scenario, r2, n, estimator, metric))


def summarize(spec, outcomes):
    rows = []
    base = {"scenario": spec.name, "r2": spec.r2, "n": spec.n}
    reps = len(outcomes)

    def add(estimator, metric, values):
        mean, se = mean_and_se(values)
        rows.append({**base, "estimator": estimator, "metric": metric, "mean": mean, "mc_se": se, "reps": reps})

    for metric, attr in (("loss_ratio", "loss_ratio"), ("risk_ratio", "risk_ratio")):
        for est in getattr(outcomes[0], attr):
            add(est, metric, [getattr(o, attr)[est] for o in outcomes])
    add("oracle", "wL_equals_true", [float(o.wL_equals_true) for o in outcomes])
    add("oracle", "inf_over_true_loss", [o.loss_ratio_optimal_inverse for o in outcomes])
    for label in outcomes[0].set_inf_at_true:
        add(label, "inf_at_true", [float(o.set_inf_at_true[label]) for o in outcomes])
    return rows


@dataclass
class ExperimentResult:
    summary: SummaryTable
    samples: dict  # spec key -> list[RepOutcome]
    specs: list


def run_experiment(specs, reps, master_seed, threads=1, phis=("mma", "logn"), weight_sets=("simplex",)):
    """Run every scenario in ``specs``; fail fast on the first broken replication."""
    rows, samples = [], {}
    for spec in specs:
        outcomes = run_reps(spec, reps, master_seed, threads, phis, weight_sets)
        samples[spec_key(spec)] = outcomes
        rows.extend(summarize(spec, outcomes))
    return ExperimentResult(SummaryTable(rows), samples, list(specs))
