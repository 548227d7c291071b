"""Hypothesis properties of the solvers and the tail-weight parametrisation."""
import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.isotonic import IsotonicRegression

from nestedavg.objectives import SeparableSimplexObjective, tail_weights, weights_from_tail
from nestedavg.solver import (
    pava_decreasing,
    project_simplex,
    solve_discrete,
    solve_generic_qp,
    solve_simplex,
)

finite = st.floats(-50, 50, allow_nan=False)
sizes = st.integers(1, 12)


@st.composite
def objectives(draw, max_models=8):
    M = draw(st.integers(1, max_models))
    A = draw(arrays(float, M, elements=st.floats(0.01, 20)))
    B = draw(arrays(float, M, elements=finite))
    return SeparableSimplexObjective(A, B, draw(finite), "criterion")


@st.composite
def simplex_points(draw, M):
    raw = draw(arrays(float, M, elements=st.floats(0, 1)))
    assume(raw.sum() > 1e-3)
    return raw / raw.sum()


@given(sizes.flatmap(lambda n: st.tuples(
    arrays(float, n, elements=finite), arrays(float, n, elements=st.floats(0.1, 10)))))
def test_pava_matches_sklearn(case):
    y, w = case
    ref = IsotonicRegression(increasing=False).fit_transform(np.arange(y.size), y, sample_weight=w)
    np.testing.assert_allclose(pava_decreasing(y, w), ref, atol=1e-9)


@given(arrays(float, st.integers(1, 20), elements=finite))
def test_simplex_projection(v):
    p = project_simplex(v)
    assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-12
    # optimality: (v - p) . (q - p) <= 0 for every vertex q
    for i in range(v.size):
        q = np.zeros(v.size)
        q[i] = 1.0
        assert (v - p) @ (q - p) <= 1e-9 * (1 + np.abs(v).max())


@given(sizes.flatmap(lambda M: simplex_points(M)))
def test_tail_roundtrip(w):
    t = tail_weights(w)
    assert t[0] == 1.0 or abs(t[0] - 1) < 1e-12
    assert np.all(np.diff(t) <= 1e-15)
    np.testing.assert_allclose(weights_from_tail(t), w, atol=1e-15)


@given(objectives(), st.data())
def test_simplex_solution_is_optimal(obj, data):
    rep = solve_simplex(obj)
    f = rep.objective_value
    scale = 1 + abs(f)
    assert f <= obj.vertex_values().min() + 1e-10 * scale
    for _ in range(5):
        w = data.draw(simplex_points(obj.M))
        assert f <= obj(w) + 1e-10 * scale
    assert rep.kkt_residual < 1e-9


@given(objectives(max_models=6))
def test_generic_qp_agrees(obj):
    a = solve_simplex(obj).objective_value
    b = solve_generic_qp(obj).objective_value
    assert abs(a - b) <= 1e-8 * (1 + abs(a))


@given(objectives(max_models=5), st.integers(1, 4))
def test_discrete_never_beats_simplex(obj, N):
    f = solve_simplex(obj).objective_value
    g = solve_discrete(obj, N).objective_value
    assert g >= f - 1e-9 * (1 + abs(f))
    # refining the grid by an integer factor cannot hurt
    assert solve_discrete(obj, 2 * N).objective_value <= g + 1e-9 * (1 + abs(g))


@given(objectives(max_models=7), st.integers(0, 6))
def test_restriction_monotone(obj, start):
    assume(start < obj.M)
    full = solve_simplex(obj).objective_value
    sub = solve_simplex(obj.restrict_from(start)).objective_value
    assert sub >= full - 1e-9 * (1 + abs(full))
