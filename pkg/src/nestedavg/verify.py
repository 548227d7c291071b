"""Seeded self-check of solver agreement and the algebraic identities.

Every check draws its own random instances from ``(seed, check, index)`` so the
report is reproducible.  ``fault="flip_A"`` negates the quadratic coefficients
used by the tail-transform check, which must then fail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dgp import gen_covariates, generate, make_scenario
from .montecarlo import run_rep, run_reps
from .objectives import (
    build_criterion,
    build_loss,
    build_risk,
    signal_gap_bound,
    loss_decomposition,
    risk_decomposition,
    tail_weights,
)
from .projection import coords_many, factorize, sigma_hat
from .solver import project_simplex, solve_generic_qp, solve_simplex

FAULTS = (None, "flip_A")


@dataclass(frozen=True)
class CheckResult:
    name: str
    count: int
    worst: float
    tol: float
    passed: bool


@dataclass
class Instance:
    design: object
    X: np.ndarray
    y: np.ndarray
    mu: np.ndarray
    e: np.ndarray
    beta: np.ndarray
    M0: int
    sigma2: float
    phi: float
    c_y: object
    c_mu: object
    c_e: object


def random_instance(rng, n_range=(15, 120), max_models=9):
    """Random nested design with a true model strictly inside the candidate list."""
    n = int(rng.integers(*n_range))
    M = int(rng.integers(3, max_models + 1))
    K = np.sort(rng.choice(np.arange(1, min(n - 1, 30) + 1), size=M, replace=False))
    rho = float(rng.uniform(-0.8, 0.8))
    X = np.ascontiguousarray(gen_covariates(n, int(K[-1]), rho, rng))
    M0 = int(rng.integers(1, M - 1))
    kt = int(K[M0])
    beta = np.zeros(K[-1])
    beta[:kt] = rng.normal(size=kt) * (rng.random(kt) < 0.7)
    beta[kt - 1] = rng.choice([-1, 1]) * rng.uniform(0.2, 2.0)
    sigma2 = float(rng.uniform(0.2, 4.0))
    mu = X @ beta
    e = math.sqrt(sigma2) * rng.normal(size=n)
    y = mu + e
    design = factorize(X, K)
    c_y, c_mu, c_e = coords_many(design, y, mu, e)
    return Instance(design, X, y, mu, e, beta, M0, sigma2, float(rng.uniform(0, 8)), c_y, c_mu, c_e)


def random_objective(inst, kind):
    if kind == "criterion":
        return build_criterion(inst.design, inst.c_y, inst.phi, sigma_hat(inst.design, inst.c_y))
    if kind == "loss":
        return build_loss(inst.design, inst.c_y, inst.c_mu)
    return build_risk(inst.design, inst.c_mu, inst.sigma2)


def _rng(seed, tag, i):
    return np.random.default_rng([seed, tag, i])


def _dense_projections(inst):
    Q = inst.design.Q
    return [Q[:, :k] @ Q[:, :k].T for k in inst.design.K]


def _dense_value(inst, kind, w, P):
    """Direct evaluation from hat matrices, no tail weights involved."""
    Pw = sum(wi * Pm for wi, Pm in zip(w, P))
    if kind == "criterion":
        r = inst.y - Pw @ inst.y
        s2 = sigma_hat(inst.design, inst.c_y)
        return float(r @ r + inst.phi * s2 * (w @ inst.design.K))
    if kind == "loss":
        r = inst.mu - Pw @ inst.y
        return float(r @ r)
    r = inst.mu - Pw @ inst.mu
    return float(r @ r + inst.sigma2 * np.trace(Pw @ Pw))


def _relerr(a, b):
    return abs(a - b) / max(1.0, abs(b))


KINDS = ("criterion", "loss", "risk")


def check_solver_agreement(seed, count=500):
    worst = 0.0
    for i in range(count):
        inst = random_instance(_rng(seed, 1, i))
        obj = random_objective(inst, KINDS[i % 3])
        f_iso = solve_simplex(obj).objective_value
        f_qp = solve_generic_qp(obj).objective_value
        worst = max(worst, abs(f_iso - f_qp))
    return CheckResult("isotonic vs generic QP objective gap", count, worst, 1e-8, worst <= 1e-8)


def check_vertex_dominance(seed, count=500):
    worst = -math.inf
    for i in range(count):
        inst = random_instance(_rng(seed, 2, i))
        obj = random_objective(inst, KINDS[i % 3])
        f = solve_simplex(obj).objective_value
        excess = (f - float(obj.vertex_values().min())) / (1.0 + abs(f))
        worst = max(worst, excess)
    return CheckResult("solution below every vertex (relative excess)", count, worst, 1e-10, worst <= 1e-10)


def _test_weights(rng, M, obj=None):
    ws = [rng.dirichlet(np.ones(M)), rng.dirichlet(0.2 * np.ones(M))]
    if obj is not None:
        ws.append(solve_simplex(obj).weights)
    return ws


def check_loss_identity(seed, count=500):
    worst = 0.0
    for i in range(count):
        rng = _rng(seed, 3, i)
        inst = random_instance(rng)
        loss = build_loss(inst.design, inst.c_y, inst.c_mu)
        for w in _test_weights(rng, inst.design.M, loss):
            lhs = loss_decomposition(inst.design, inst.c_y, inst.c_e, inst.M0, w)
            worst = max(worst, _relerr(lhs, float(loss(w))))
    return CheckResult("loss decomposition around the true model", count, worst, 1e-8, worst <= 1e-8)


def check_risk_identity(seed, count=500):
    worst = 0.0
    for i in range(count):
        rng = _rng(seed, 4, i)
        inst = random_instance(rng)
        risk = build_risk(inst.design, inst.c_mu, inst.sigma2)
        for w in _test_weights(rng, inst.design.M, risk):
            lhs = risk_decomposition(inst.design, inst.c_mu, inst.sigma2, inst.M0, w)
            worst = max(worst, _relerr(lhs, float(risk(w))))
    return CheckResult("risk decomposition around the true model", count, worst, 1e-8, worst <= 1e-8)


def check_tail_transform(seed, count=500, fault=None):
    worst = 0.0
    for i in range(count):
        rng = _rng(seed, 5, i)
        inst = random_instance(rng, n_range=(15, 60))
        P = _dense_projections(inst)
        kind = KINDS[i % 3]
        obj = random_objective(inst, kind)
        A = -obj.A if fault == "flip_A" else obj.A
        for w in _test_weights(rng, inst.design.M):
            t = tail_weights(w)
            sep = obj.c0 + (t * t) @ A + t @ obj.B
            worst = max(worst, _relerr(sep, _dense_value(inst, kind, w, P)))
    return CheckResult("tail-weight form equals dense evaluation", count, worst, 1e-8, worst <= 1e-8)


def check_gap_inequality(seed, count=100):
    """``mu'(P_{M0+1} - P_m)mu >= kappa0 n * (window sum of beta^2)``; reports min lhs/rhs - 1."""
    worst = math.inf
    for i in range(count):
        inst = random_instance(_rng(seed, 6, i))
        for m in range(1, inst.M0 + 1):
            lhs, rhs = signal_gap_bound(inst.design, inst.c_mu, inst.beta, inst.M0, m)
            if rhs > 0:
                worst = min(worst, lhs / rhs - 1.0)
    return CheckResult("signal gap lower bound (min lhs/rhs - 1)", count, worst, -1e-10, worst >= -1e-10)


def check_toy_closed_forms(seed, count=200):
    """Three nested models, orthogonal columns of norm sqrt(n), mean in model 2."""
    worst = 0.0
    beta = np.array([-1.0, 0.1, 0.0])
    for i in range(count):
        rng = _rng(seed, 7, i)
        n = int(rng.integers(20, 3000))
        Q, _ = np.linalg.qr(rng.normal(size=(n, 3)))
        X = math.sqrt(n) * Q
        mu = X @ beta
        e = rng.normal(size=n)
        y = mu + e
        design = factorize(X, (1, 2, 3))
        c_y, c_mu, c_e = coords_many(design, y, mu, e)
        w = solve_simplex(build_loss(design, c_y, c_mu)).weights
        d2 = slice(1, 2)
        w1opt = float(c_y.d[d2] @ c_e.d[d2] / (c_y.d[d2] @ c_y.d[d2]))
        worst = max(worst, abs(w[0] - min(max(w1opt, 0.0), 1.0)), abs(w[2]))
        wr = solve_simplex(build_risk(design, c_mu, 1.0)).weights
        w1r = 1.0 / (n * beta[1] ** 2 + 1.0)
        worst = max(worst, abs(wr[0] - w1r), abs(wr[1] - (1 - w1r)), abs(wr[2]))
    return CheckResult("toy closed forms for w^L and w^R", count, worst, 1e-9, worst <= 1e-9)


def check_idempotence(seed, count=500):
    worst = 0.0
    for i in range(count):
        rng = _rng(seed, 8, i)
        v = rng.normal(scale=3.0, size=int(rng.integers(1, 30)))
        p = project_simplex(v)
        worst = max(worst, float(np.max(np.abs(project_simplex(p) - p))), abs(p.sum() - 1.0))
        if i % 5 == 0:
            inst = random_instance(rng, n_range=(15, 60))
            m = int(rng.integers(1, inst.design.M + 1))
            pv = inst.design.project(inst.y, m)
            scale = max(1.0, float(np.max(np.abs(pv))))
            worst = max(worst, float(np.max(np.abs(inst.design.project(pv, m) - pv))) / scale)
    return CheckResult("projections are idempotent", count, worst, 1e-12, worst <= 1e-12)


def check_determinism(seed, count=20):
    ok = True
    for name, n, r2 in (("toy", 300, None), ("fixed", 300, 0.5), ("div2", 300, 0.5)):
        spec = make_scenario(name, n, r2)
        a, b = generate(spec, 3, seed), generate(spec, 3, seed)
        ok &= np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
        ra, rb = run_rep(spec, 5, seed), run_rep(spec, 5, seed)
        ok &= ra.loss_ratio == rb.loss_ratio and ra.risk_ratio == rb.risk_ratio
        s1 = run_reps(spec, count, seed, threads=1)
        s3 = run_reps(spec, count, seed, threads=3)
        ok &= all(x.loss_ratio == y.loss_ratio and x.risk_ratio == y.risk_ratio for x, y in zip(s1, s3))
    return CheckResult("bit-identical replays and thread budgets", count, 0.0 if ok else 1.0, 0.0, bool(ok))


def run_all(seed=20240101, fault=None, scale=1.0):
    """Run every check; ``scale`` shrinks instance counts for quick runs."""
    if fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}")

    def c(k):
        return max(1, int(round(k * scale)))

    return [
        check_solver_agreement(seed, c(500)),
        check_vertex_dominance(seed, c(500)),
        check_loss_identity(seed, c(500)),
        check_risk_identity(seed, c(500)),
        check_tail_transform(seed, c(500), fault=fault),
        check_gap_inequality(seed, c(100)),
        check_toy_closed_forms(seed, c(200)),
        check_idempotence(seed, c(500)),
        check_determinism(seed, c(20)),
    ]


def format_report(results):
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  {'count':>5}  {'worst':>11}  {'tol':>9}  result"]
    for r in results:
        lines.append(
            f"{r.name:<{width}}  {r.count:>5}  {r.worst:>11.3e}  {r.tol:>9.1e}  {'PASS' if r.passed else 'FAIL'}"
        )
    return "\n".join(lines)
