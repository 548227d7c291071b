import math

import cvxpy as cp
import numpy as np
import pytest

import oracles
from nestedavg import montecarlo
from nestedavg.dgp import ScenarioSpec, generate, make_scenario
from nestedavg.errors import RepFailure
from nestedavg.montecarlo import (
    mean_and_se,
    parse_weight_set,
    phi_value,
    run_experiment,
    run_rep,
    run_reps,
    spec_key,
    summarize,
)
from nestedavg.objectives import Discrete, Simplex


def test_phi_values():
    assert phi_value("mma", 100) == 2.0
    assert phi_value("logn", 100) == pytest.approx(math.log(100))
    assert phi_value("3.5", 100) == 3.5
    for bad in ("0", "-1", "abc"):
        with pytest.raises(ValueError):
            phi_value(bad, 100)


def test_weight_set_parsing():
    assert parse_weight_set("simplex") == Simplex()
    assert parse_weight_set("discrete:2") == Discrete(2)
    assert parse_weight_set("restricted:0.1,0.25") == ("restricted", 0.1, 0.25)
    for bad in ("discrete:0", "restricted:0,1", "lattice", "restricted:1"):
        with pytest.raises(ValueError):
            parse_weight_set(bad)


def test_single_candidate_gives_unit_ratios():
    spec = ScenarioSpec("custom", 40, 0.0, (1.0, -0.5), (2,), 1.0)
    out = run_rep(spec, 0, 1)
    assert all(v == 1.0 for v in out.loss_ratio.values())
    assert all(v == 1.0 for v in out.risk_ratio.values())


def test_ratio_bounds():
    spec = make_scenario("fixed", 200, 0.5)
    for o in run_reps(spec, 30, 3, weight_sets=("simplex", "discrete:2", "restricted:0.1,0.25")):
        assert min(o.loss_ratio.values()) >= 1 - 1e-10
        assert min(o.risk_ratio.values()) >= 1 - 1e-10
        assert -1e-12 <= o.loss_ratio_optimal_inverse <= 1 + 1e-10
        assert o.discrete_inf_at_true in (True, False)


def test_pma_drops_largest_model_more_often_with_n():
    def freq(n):
        out = run_reps(make_scenario("toy", n), 300, 17, phis=("logn",))
        return np.mean([o.weights["logn"][2] == 0.0 for o in out])

    small, large = freq(100), freq(3000)
    assert large >= small and large > 0.85


def _dense_rep(spec, rep, seed, phi):
    """Every quantity of one replication from hat matrices and an interior-point QP."""
    g = generate(spec, rep, seed)
    X, K, y, mu, s2 = g.X, spec.K, g.y, g.mu, g.sigma2
    P = oracles.dense_projections(X, K)
    n, M = spec.n, spec.M
    Zy = np.column_stack([Pm @ y for Pm in P])
    Zmu = np.column_stack([Pm @ mu for Pm in P])
    Kmin = np.minimum.outer(np.array(K, float), np.array(K, float))
    sig_hat = y @ (y - P[-1] @ y) / (n - K[-1])

    def argmin(expr_fn):
        w = cp.Variable(M)
        prob = cp.Problem(cp.Minimize(expr_fn(w)), [w >= 0, cp.sum(w) == 1])
        prob.solve(solver=cp.CLARABEL)
        return np.clip(w.value, 0, None) / np.clip(w.value, 0, None).sum()

    L = lambda w: float(np.sum((mu - Zy @ w) ** 2))
    R = lambda w: float(np.sum((mu - Zmu @ w) ** 2) + s2 * w @ Kmin @ w)
    wL = argmin(lambda w: cp.sum_squares(mu - Zy @ w))
    wR = argmin(lambda w: cp.sum_squares(mu - Zmu @ w) + s2 * cp.quad_form(w, Kmin))
    w_hat = argmin(lambda w: cp.sum_squares(y - Zy @ w) + phi * sig_hat * (np.array(K, float) @ w))
    true = np.eye(M)[spec.M0]
    return {
        "loss_true": L(true) / L(wL),
        "risk_true": R(true) / R(wR),
        "loss_hat": L(w_hat) / L(wL),
        "risk_hat": R(w_hat) / R(wR),
    }


def test_full_pipeline_against_dense_recomputation():
    spec = make_scenario("fixed", 150, 0.5)
    for rep in (0, 1):
        fast = run_rep(spec, rep, 5, phis=("logn",))
        dense = _dense_rep(spec, rep, 5, math.log(150))
        assert fast.loss_ratio["true"] == pytest.approx(dense["loss_true"], rel=1e-5)
        assert fast.risk_ratio["true"] == pytest.approx(dense["risk_true"], rel=1e-5)
        assert fast.loss_ratio["logn"] == pytest.approx(dense["loss_hat"], rel=1e-4)
        assert fast.risk_ratio["logn"] == pytest.approx(dense["risk_hat"], rel=1e-4)


def test_single_rep_table():
    spec = make_scenario("div2", 300, 0.5)
    res = run_experiment([spec], 1, 8)
    o = res.samples[spec_key(spec)][0]
    for row in res.summary.rows:
        assert row["reps"] == 1 and row["mc_se"] == 0.0
    assert res.summary.get(estimator="mma", metric="loss_ratio")["mean"] == o.loss_ratio["mma"]
    assert res.summary.get(estimator="oracle", metric="wL_equals_true")["mean"] == float(o.wL_equals_true)


def test_thread_budget_does_not_change_results():
    spec = make_scenario("fixed", 200, 0.9)
    a = run_experiment([spec], 40, 21, threads=1).summary.rows
    b = run_experiment([spec], 40, 21, threads=8).summary.rows
    assert a == b


def test_fail_fast(monkeypatch):
    real = montecarlo.run_rep

    def flaky(spec, r, *args):
        if r == 3:
            raise ValueError("boom")
        return real(spec, r, *args)

    monkeypatch.setattr(montecarlo, "run_rep", flaky)
    spec = make_scenario("toy", 100)
    for threads in (1, 4):
        with pytest.raises(RepFailure) as err:
            run_experiment([spec], 10, 0, threads=threads)
        assert err.value.rep_index == 3


def test_mean_and_se():
    m, se = mean_and_se([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5
    assert se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert mean_and_se([7.0]) == (7.0, 0.0)


def test_summary_rows_cover_estimators():
    spec = make_scenario("fixed", 200, 0.5)
    outs = run_reps(spec, 5, 1, weight_sets=("simplex", "discrete:2"))
    rows = summarize(spec, outs)
    keys = {(r["estimator"], r["metric"]) for r in rows}
    for est in ("true", "mma", "logn", "mma@discrete:2", "logn@discrete:2"):
        assert (est, "loss_ratio") in keys and (est, "risk_ratio") in keys
    assert ("discrete:2", "inf_at_true") in keys
    assert spec_key(spec) == "fixed_r2-0.5_n-200"
