import math

import numpy as np
import pytest

import oracles
from nestedavg.errors import DegenerateTruthError
from nestedavg.objectives import (
    Discrete,
    Restricted,
    SeparableSimplexObjective,
    WeightVector,
    build_criterion,
    build_loss,
    build_risk,
    diagnostics,
    eta,
    kappa0,
    signal_gap_bound,
    loss_decomposition,
    psi_k,
    risk_decomposition,
    tail_weights,
    unit_weights,
    weights_from_tail,
)
from nestedavg.projection import coords, coords_many, factorize, sigma_hat


def make(rng, n=40, K=(1, 2, 4, 6), M0=1, sigma2=1.3):
    X = oracles.random_design(rng, n, K)
    beta = np.zeros(K[-1])
    beta[: K[M0]] = rng.normal(size=K[M0])
    beta[K[M0] - 1] = 1.5
    mu = X @ beta
    e = math.sqrt(sigma2) * rng.normal(size=n)
    d = factorize(X, K)
    c_y, c_mu, c_e = coords_many(d, mu + e, mu, e)
    return X, K, mu, e, d, c_y, c_mu, c_e, beta


def test_tail_roundtrip(rng):
    w = oracles.random_simplex(rng, 7)
    t = tail_weights(w)
    assert t[0] == pytest.approx(1.0)
    assert np.all(np.diff(t) <= 0)
    np.testing.assert_allclose(weights_from_tail(t), w, atol=1e-15)


def test_negative_curvature_rejected():
    with pytest.raises(ValueError):
        SeparableSimplexObjective(np.array([1.0, -0.5]), np.zeros(2), 0.0)
    obj = SeparableSimplexObjective(np.array([1.0, -1e-14]), np.zeros(2), 0.0)
    assert obj.A[1] == 0.0


def test_criterion_single_model(rng):
    X = rng.normal(size=(20, 2))
    y = rng.normal(size=20)
    d = factorize(X, (2,))
    c = coords(d, y)
    s2 = sigma_hat(d, c)
    obj = build_criterion(d, c, 2.0, s2)
    P = oracles.dense_projection(X, 2)
    r = y - P @ y
    assert obj(np.ones(1)) == pytest.approx(r @ r + 2.0 * s2 * 2, rel=1e-12)


def test_criterion_without_penalty_at_largest_model(rng):
    X, K, mu, e, d, c_y, *_ = make(rng)
    obj = build_criterion(d, c_y, 0.0, 1.0)
    y = mu + e
    expected = y @ y - y @ oracles.dense_projection(X, K[-1]) @ y
    assert obj(unit_weights(4, 4)) == pytest.approx(expected, rel=1e-10)


def test_criterion_rejects_negative_inputs(rng):
    *_, d, c_y, _, _, _ = make(rng)
    with pytest.raises(ValueError):
        build_criterion(d, c_y, -1.0, 1.0)
    with pytest.raises(ValueError):
        build_criterion(d, c_y, 1.0, -1.0)


def test_objectives_match_dense_definitions(rng):
    X, K, mu, e, d, c_y, c_mu, _, _ = make(rng)
    y = mu + e
    crit = build_criterion(d, c_y, 3.0, sigma_hat(d, c_y))
    loss = build_loss(d, c_y, c_mu)
    risk = build_risk(d, c_mu, 1.3)
    for w in oracles.random_simplex(rng, 4, size=20):
        assert crit(w) == pytest.approx(oracles.criterion(X, K, y, w, 3.0), rel=1e-9)
        assert loss(w) == pytest.approx(oracles.loss(X, K, y, mu, w), rel=1e-9)
        assert risk(w) == pytest.approx(oracles.risk(X, K, mu, 1.3, w), rel=1e-9)


def test_loss_zero_cases(rng):
    X, K, mu, e, d, c_y, c_mu, _, _ = make(rng)
    c0 = coords(d, mu)
    exact = build_loss(d, c0, c0)  # e = 0
    for m in range(2, 5):  # every model containing the truth (M0 = 1)
        assert abs(exact(unit_weights(4, m))) < 1e-10 * (mu @ mu)
    w = np.array([0.0, 0.2, 0.5, 0.3])
    assert abs(exact(w)) < 1e-10 * (mu @ mu)


def test_risk_at_true_model(rng):
    X, K, mu, e, d, c_y, c_mu, _, _ = make(rng)
    risk = build_risk(d, c_mu, 1.3)
    assert risk(unit_weights(4, 2)) == pytest.approx(1.3 * K[1], rel=1e-10)
    assert np.all(risk.A > 0)
    with pytest.raises(ValueError):
        build_risk(d, c_mu, 0.0)


def test_risk_is_expected_loss(rng):
    """Average dense loss over fresh errors, design and mean held fixed."""
    n, K, s2 = 30, (1, 3, 5), 0.8
    X = oracles.random_design(rng, n, K)
    mu = X[:, :3] @ np.array([1.0, -0.5, 0.7])
    w = np.array([0.2, 0.5, 0.3])
    Pw = oracles.averaged_hat(oracles.dense_projections(X, K), w)
    reps = 100_000
    E = math.sqrt(s2) * rng.normal(size=(reps, n))
    resid = mu - (mu + E) @ Pw.T
    losses = np.einsum("ij,ij->i", resid, resid)
    d = factorize(X, K)
    risk = build_risk(d, coords(d, mu), s2)
    se = losses.std(ddof=1) / math.sqrt(reps)
    assert abs(losses.mean() - risk(w)) < 3 * se


def test_example_one_risk_form(rng):
    n, s2 = 200, 1.0
    X = math.sqrt(n) * np.linalg.qr(rng.normal(size=(n, 3)))[0]
    beta = np.array([-1.0, 0.1, 0.0])
    mu = X @ beta
    d = factorize(X, (1, 2, 3))
    risk = build_risk(d, coords(d, mu), s2)
    for w1 in (0.0, 0.3, 0.9):
        for w3 in (0.0, 0.05):
            w = np.array([w1, 1 - w1 - w3, w3])
            expected = 2 * s2 + w1**2 * (n * beta[1] ** 2 + s2) - 2 * w1 * s2 + w3**2 * s2
            assert risk(w) == pytest.approx(expected, rel=1e-10)
            assert risk_decomposition(d, coords(d, mu), s2, 1, w) == pytest.approx(expected, rel=1e-10)


def test_decompositions_at_true_model(rng):
    X, K, mu, e, d, c_y, c_mu, c_e, _ = make(rng, M0=2)
    w0 = unit_weights(4, 3)
    expected = e @ oracles.dense_projection(X, K[2]) @ e
    assert loss_decomposition(d, c_y, c_e, 2, w0) == pytest.approx(expected, rel=1e-10)
    assert risk_decomposition(d, c_mu, 1.3, 2, w0) == pytest.approx(1.3 * K[2], rel=1e-12)


def test_loss_identity_three_models(rng):
    n = 80
    X = rng.normal(size=(n, 3))
    mu = X @ np.array([-1.0, 0.1, 0.0])
    e = rng.normal(size=n)
    y = mu + e
    d = factorize(X, (1, 2, 3))
    c_y, c_e, c_mu = coords_many(d, y, e, mu)
    P1, P2, P3 = oracles.dense_projections(X, (1, 2, 3))
    base = e @ P2 @ e
    for w in oracles.random_simplex(rng, 3, size=10):
        w1, _, w3 = w
        expected = base + w1**2 * y @ (P2 - P1) @ y - 2 * w1 * y @ (P2 - P1) @ e + w3**2 * e @ (P3 - P2) @ e
        assert loss_decomposition(d, c_y, c_e, 1, w) == pytest.approx(expected, rel=1e-9)
        assert build_loss(d, c_y, c_mu)(w) == pytest.approx(expected, rel=1e-9)


def test_decompositions_match_objectives(rng):
    for M0 in (1, 2):
        X, K, mu, e, d, c_y, c_mu, c_e, _ = make(rng, n=60, K=(1, 2, 4, 6, 7), M0=M0)
        loss, risk = build_loss(d, c_y, c_mu), build_risk(d, c_mu, 1.3)
        for w in oracles.random_simplex(rng, 5, size=20):
            assert loss_decomposition(d, c_y, c_e, M0, w) == pytest.approx(loss(w), rel=1e-8)
            assert risk_decomposition(d, c_mu, 1.3, M0, w) == pytest.approx(risk(w), rel=1e-8)


def test_decomposition_rejects_bad_m0(rng):
    *_, d, c_y, c_mu, c_e, _ = make(rng)
    with pytest.raises(ValueError):
        loss_decomposition(d, c_y, c_e, 3, np.ones(4) / 4)
    with pytest.raises(ValueError):
        risk_decomposition(d, c_mu, 1.0, 0, np.ones(4) / 4)


def test_eta():
    assert eta((1, -2, 3, 1.5, 4), range(1, 12), 4) == 16.0
    p = 20
    beta = [1 / j for j in range(1, p)] + [1.0]
    assert eta(beta, range(p - 3, p + 6), 3) == 1.0
    assert eta((1, 0, 0), (1, 2, 3), 1) == 0.0


def test_kappa0_matches_eigensolver(rng):
    X = oracles.random_design(rng, 60, (2, 4, 6), rho=0.7)
    d = factorize(X, (2, 4, 6))
    Xk = X[:, :4]
    expected = np.linalg.eigvalsh(Xk.T @ Xk / 60)[0]
    assert kappa0(d, 1) == pytest.approx(expected, rel=1e-8)


def test_unit_direction_orthonormal_design(rng):
    n = 100
    X = math.sqrt(n) * np.linalg.qr(rng.normal(size=(n, 4)))[0]
    mu = X @ np.array([1.0, -0.5, 2.0, 0.0])
    d = factorize(X, (1, 2, 3, 4))
    diag = diagnostics(d, coords(d, mu), 1.0, 2)
    v = diag.v
    assert abs(abs(v[-1]) - 1.0) < 1e-10 and np.max(np.abs(v[:-1])) < 1e-10
    assert diag.xi_n > 0 and diag.kappa0 == pytest.approx(1.0)


def test_unit_direction_is_unit(rng):
    X, K, mu, e, d, c_y, c_mu, *_ = make(rng, n=80, M0=2)
    assert np.linalg.norm(diagnostics(d, c_mu, 1.0, 2).v) == pytest.approx(1.0)


def test_degenerate_truth(rng):
    X = rng.normal(size=(30, 3))
    mu = X[:, 0] * 2.0
    d = factorize(X, (1, 2, 3))
    with pytest.raises(DegenerateTruthError):
        diagnostics(d, coords(d, mu), 1.0, 1)


def test_psi_single_model(rng):
    X = rng.normal(size=(10, 2))
    d = factorize(X, (2,))
    assert psi_k(d, coords(d, X[:, 0]), 0) == 1.0


def test_gap_inequality(rng):
    X, K, mu, e, d, c_y, c_mu, _, beta = make(rng, n=80, K=(1, 2, 4, 6), M0=2)
    for m in (1, 2):
        lhs, rhs = signal_gap_bound(d, c_mu, beta, 2, m)
        assert lhs >= rhs - 1e-8 * abs(lhs)
    with pytest.raises(ValueError):
        signal_gap_bound(d, c_mu, beta, 2, 3)


def test_gap_inequality_zero_window(rng):
    X = rng.normal(size=(30, 3))
    d = factorize(X, (1, 2, 3))
    beta = np.array([1.0, 0.0, 0.0])
    lhs, rhs = signal_gap_bound(d, coords(d, X @ beta), beta, 1, 1)
    assert rhs == 0.0 and lhs >= rhs


def test_gap_inequality_fixed_design(rng):
    from nestedavg.dgp import generate, make_scenario

    spec = make_scenario("fixed", 500, 0.5)
    data = generate(spec, 0, 1)
    d = factorize(data.X, spec.K)
    lhs, rhs = signal_gap_bound(d, coords(d, data.mu), spec.beta, spec.M0, spec.M0)
    assert rhs == pytest.approx(kappa0(d, spec.M0) * 500 * 16)
    assert lhs >= rhs


def test_weight_vector_sets():
    WeightVector(np.array([0.5, 0.5]), Discrete(2))
    with pytest.raises(ValueError):
        WeightVector(np.array([0.3, 0.7]), Discrete(2))
    with pytest.raises(ValueError):
        WeightVector(np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        WeightVector(np.array([-0.1, 1.1]))
    tag = Restricted(0.1, 0.25, 1, 10_000)
    assert tag.threshold == pytest.approx(0.01)
    WeightVector(np.array([0.0, 1.0]), tag)
    WeightVector(np.array([0.02, 0.98]), tag)
    with pytest.raises(ValueError):
        WeightVector(np.array([0.005, 0.995]), tag)
