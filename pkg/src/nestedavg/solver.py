"""Exact minimisation of separable tail-weight objectives over weight sets.

The default route minimises ``sum_m A_m (t_m - tau_m)^2`` with
``tau_m = -B_m / (2 A_m)`` over ``1 >= t_2 >= ... >= t_M >= 0``: a weighted
antitonic regression (pool adjacent violators) followed by clipping to
``[0, 1]``.  Clipping must come after pooling; clipping the targets first
gives the wrong answer whenever a pooled block straddles a bound.

``solve_generic_qp`` solves the same problem in w-space by accelerated
projected gradient on the dense min-matrix Hessian and serves as the
independent cross-check.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, SolverError
from .objectives import (
    Discrete,
    Restricted,
    SeparableSimplexObjective,
    Simplex,
    WeightVector,
    tail_weights,
    weights_from_tail,
)

SNAP = 1e-14
DEGENERATE_A = 1e-12
ENUM_BUDGET = 10**7
KKT_STOP = 1e-12
LONG_STALL = 20000


@dataclass(frozen=True)
class SolveReport:
    w: WeightVector
    objective_value: float
    method: str
    kkt_residual: float
    flags: tuple = ()

    @property
    def weights(self):
        return self.w.w


def pava_decreasing(y, weights):
    """Weighted least-squares fit of a nonincreasing sequence to ``y``.

    Stack-based pool adjacent violators, O(len(y)).  Weights must be positive.
    """
    y = np.asarray(y, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n = y.size
    if n == 0:
        return y.copy()
    means = [0.0] * n
    wsum = [0.0] * n
    count = [0] * n
    top = -1
    for i in range(n):
        top += 1
        means[top] = y[i]
        wsum[top] = weights[i]
        count[top] = 1
        # a later value above an earlier one violates "nonincreasing"
        while top > 0 and means[top - 1] <= means[top]:
            wt = wsum[top - 1] + wsum[top]
            means[top - 1] = (wsum[top - 1] * means[top - 1] + wsum[top] * means[top]) / wt
            wsum[top - 1] = wt
            count[top - 1] += count[top]
            top -= 1
    return np.repeat(np.array(means[: top + 1]), count[: top + 1])


def project_simplex(v, total=1.0):
    """Euclidean projection onto ``{w >= 0, sum w = total}`` (sort and threshold)."""
    v = np.asarray(v, dtype=float)
    if total == 0:
        return np.zeros_like(v)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def kkt_residual(obj, w):
    """Scaled duality gap ``w'g - min(g)`` at ``w`` for the simplex.

    It is zero exactly when every positive weight sits at the smallest
    gradient entry, and it bounds ``f(w) - min f`` for convex ``f``.  Scaled
    by ``1 + max|g|``.
    """
    g = obj.gradient(w)
    gap = max(float(w @ g - g.min()), 0.0)
    return gap / (1.0 + float(np.max(np.abs(g))))


def _finish(obj, w, method, tag=None, flags=(), kkt=True):
    w = np.where(w < SNAP, 0.0, w)
    w = w / w.sum()
    wv = WeightVector(w, tag if tag is not None else Simplex())
    res = kkt_residual(obj, w) if kkt else 0.0
    return SolveReport(wv, float(obj(w)), method, res, tuple(flags))


def _isotonic_tail(A, B, lo, hi):
    """Minimise sum A (t - tau)^2 over antitonic t in [lo, hi] (constant bounds)."""
    if A.size == 0:
        return A.copy()
    tau = -B / (2.0 * A)
    return np.clip(pava_decreasing(tau, A), lo, hi)


def _degenerate(A):
    scale = float(np.max(A)) if A.size else 0.0
    return A.size > 0 and (scale <= 0 or np.any(A < DEGENERATE_A * scale))


def solve_simplex(obj: SeparableSimplexObjective) -> SolveReport:
    """Global minimiser over the unit simplex."""
    M = obj.M
    if M == 1:
        return _finish(obj, np.ones(1), "isotonic")
    A, B = obj.A[1:], obj.B[1:]
    if _degenerate(obj.A[1:]):
        return solve_generic_qp(obj)
    t = np.concatenate(([1.0], _isotonic_tail(A, B, 0.0, 1.0)))
    return _finish(obj, weights_from_tail(t), "isotonic")


def _cap_from_bounds(M, caps):
    """Reduce tail caps to a single step ``t_m <= c for m >= j`` (1-based j)."""
    caps = np.minimum.accumulate(np.minimum(np.asarray(caps, dtype=float), 1.0))
    if caps.shape != (M,):
        raise ValueError("need one cap per model")
    below = np.nonzero(caps < 1.0)[0]
    if below.size == 0:
        return None
    j = below[0]
    if np.any(caps[j:] != caps[j]):
        raise ValueError("only a single-step cap sequence is supported")
    if j == 0:
        raise ValueError("t_1 = 1 cannot be capped below 1")
    return j, float(caps[j])


def _project_capped(v, step):
    """Projection onto the simplex intersected with ``sum(w[:j]) >= 1 - c``."""
    w = project_simplex(v)
    if step is None:
        return w
    j, c = step
    if w[:j].sum() >= 1.0 - c:
        return w
    return np.concatenate((project_simplex(v[:j], 1.0 - c), project_simplex(v[j:], c)))


def _linear_vertex(g, step):
    """Minimiser of a linear function over the (possibly capped) simplex."""
    M = g.size
    best = int(np.argmin(g))
    if step is None or best < step[0]:
        return np.eye(M)[best]
    j, c = step
    w = np.zeros(M)
    w[int(np.argmin(g[:j]))] = 1.0 - c
    w[j + int(np.argmin(g[j:]))] += c
    return w


def _gap(H, lin, w, step_cap):
    """Duality gap over the feasible set, scaled by ``1 + max|g|``."""
    g = H @ w + lin
    v = _linear_vertex(g, step_cap)
    return max(float(w @ g - v @ g), 0.0) / (1.0 + float(np.max(np.abs(g))))


def solve_generic_qp(obj, extra_upper_bounds=None, max_iter=10**6, tol=KKT_STOP):
    """Accelerated projected gradient in w-space on the dense quadratic.

    Stops once the duality gap certificate drops below ``tol`` or has not
    improved for ``LONG_STALL`` iterations.  Objective decrease is not used:
    near the optimum it is lost in rounding of ``c0``.
    """
    M = obj.M
    step_cap = None if extra_upper_bounds is None else _cap_from_bounds(M, extra_upper_bounds)
    if M == 1:
        return _finish(obj, np.ones(1), "generic_qp")
    H = obj.hessian()
    # exact top eigenvalue: a power-iteration estimate can undershoot
    L = float(np.linalg.eigvalsh(H)[-1]) * 1.01
    # the w-space gradient is affine: H w + cumsum(B)
    lin = np.cumsum(obj.B)
    w = _project_capped(np.ones(M) / M, step_cap)
    if L <= 0:
        return _finish(obj, _linear_vertex(lin, step_cap), "generic_qp")
    z, theta = w.copy(), 1.0
    best_w, best_r = w, _gap(H, lin, w, step_cap)
    stall = 0
    for it in range(max_iter):
        w_new = _project_capped(z - (H @ z + lin) / L, step_cap)
        if (z - w_new) @ (w_new - w) > 0:
            # gradient-based adaptive restart
            theta, z = 1.0, w_new
        else:
            theta_next = 0.5 * (1 + math.sqrt(1 + 4 * theta * theta))
            z = w_new + ((theta - 1) / theta_next) * (w_new - w)
            theta = theta_next
        w = w_new
        if it % 10 == 9:
            r = _gap(H, lin, w, step_cap)
            if r < best_r:
                best_w, best_r = w, r
                stall = 0
            else:
                stall += 10
            if best_r < tol or stall >= LONG_STALL:
                break
    if best_r >= 1e-6:
        raise SolverError("projected gradient did not converge", best=best_w, kkt_residual=best_r)
    return _finish(obj, best_w, "generic_qp", kkt=step_cap is None)


def composition_count(M, N):
    return math.comb(N + M - 1, M - 1)


def compositions(M, N):
    """All ``w`` with ``N w`` a composition of N into M parts, lexicographically ascending."""
    rows = []
    for bars in itertools.combinations(range(N + M - 1), M - 1):
        edges = (-1,) + bars + (N + M - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(M)])
    W = np.array(rows, dtype=float) / N
    order = np.lexsort(W.T[::-1])
    return W[order]


def solve_discrete(obj, N, budget=ENUM_BUDGET):
    """Exact minimum over ``{w : N w integer}``; ties go to the lexicographically smallest w."""
    if N < 1:
        raise ValueError("grid denominator must be a positive integer")
    count = composition_count(obj.M, N)
    if count > budget:
        raise CapacityError(count, budget)
    W = compositions(obj.M, N)
    T = tail_weights(W)
    vals = obj.c0 + (T * T) @ obj.A + T @ obj.B
    best = int(np.argmin(vals))  # first minimum in lexicographic order
    rep = _finish(obj, W[best], "enumeration", Discrete(N), kkt=False)
    return rep


def solve_restricted(obj, delta, tau0, M0, n):
    """Minimum over weights whose under-fitted mass is 0 or at least ``delta n^-tau0``."""
    if not (delta > 0 and tau0 > 0):
        raise ValueError("delta and tau0 must be positive")
    M = obj.M
    if not 1 <= M0 < M:
        raise ValueError(f"M0={M0} out of range for {M} models")
    tag = Restricted(delta, tau0, M0, n)
    c = tag.threshold

    # phase (a): no under-fitted weight
    sub = solve_simplex(obj.restrict_from(M0))
    wa = np.concatenate((np.zeros(M0), sub.weights))
    rep_a = _finish(obj, wa, "restricted_two_phase", tag, kkt=False)
    if c >= 1.0:
        return SolveReport(rep_a.w, rep_a.objective_value, rep_a.method, 0.0, ("infeasible_threshold",))

    # phase (b): under-fitted mass >= c, i.e. t_{M0+1} <= 1 - c
    free = solve_simplex(obj)
    if free.weights[:M0].sum() >= c:
        wb = free.weights
    elif _degenerate(obj.A[1:]):
        caps = np.ones(M)
        caps[M0:] = 1.0 - c
        wb = solve_generic_qp(obj, extra_upper_bounds=caps).weights
    else:
        # the cap is active at the optimum: pin t_{M0+1} and split
        upper = _isotonic_tail(obj.A[1:M0], obj.B[1:M0], 1.0 - c, 1.0)
        lower = _isotonic_tail(obj.A[M0 + 1:], obj.B[M0 + 1:], 0.0, 1.0 - c)
        t = np.concatenate(([1.0], upper, [1.0 - c], lower))
        wb = weights_from_tail(t)
    # snapping must not push the under-fitted mass below the threshold
    wb = np.where(wb < SNAP, 0.0, wb)
    wb = wb / wb.sum()
    s = wb[:M0].sum()
    if 0 < s < c:
        wb[:M0] *= c / s
        wb[M0:] *= (1 - c) / wb[M0:].sum()
    rep_b = _finish(obj, wb, "restricted_two_phase", tag, kkt=False)
    return rep_a if rep_a.objective_value <= rep_b.objective_value else rep_b
