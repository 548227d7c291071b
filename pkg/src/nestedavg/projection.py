"""Nested least-squares projections through a single QR factorization.

Candidate model ``m`` uses the first ``k_m`` columns of the design.  With
``X = Q R`` (thin QR of the largest design), the hat matrix of model ``m`` is
``Q[:, :k_m] Q[:, :k_m].T``, so every quadratic form ``u' P_m v`` is a prefix
sum over the orthonormal coordinates ``Q' u`` and ``Q' v``.  Nothing in the
pipeline ever forms an ``n x n`` projection.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankDeficiencyError

RANK_TOL = 1e-12


@dataclass(frozen=True)
class NestedDesign:
    n: int
    K: np.ndarray
    Q: np.ndarray | None
    R: np.ndarray

    @property
    def M(self) -> int:
        return len(self.K)

    @property
    def k_max(self) -> int:
        return int(self.K[-1])

    def project(self, v, m):
        """Return ``P_m v`` for 1-based model index ``m``."""
        if self.Q is None:
            raise ValueError("design was factorized without Q")
        k = int(self.K[_check_model(self, m) - 1])
        Qm = self.Q[:, :k]
        return Qm @ (Qm.T @ np.asarray(v, dtype=float))


@dataclass(frozen=True)
class ProjectionCoefficients:
    """Coordinates ``d = Q' v`` of a vector and its squared norm."""

    d: np.ndarray
    sq_norm: float
    n: int

    def prefix(self, k):
        return float(np.dot(self.d[:k], self.d[:k]))


def check_sizes(K, n=None):
    K = np.asarray(K)
    if K.ndim != 1 or K.size == 0:
        raise ValueError("nesting sizes K must be a non-empty 1-d sequence")
    if not np.all(np.equal(np.mod(K, 1), 0)):
        raise ValueError(f"nesting sizes must be integers, got {K.tolist()}")
    K = K.astype(int)
    if K[0] < 1:
        raise ValueError("nesting sizes must be positive")
    if np.any(np.diff(K) <= 0):
        raise ValueError(f"nesting sizes must be strictly increasing, got {K.tolist()}")
    if n is not None and K[-1] >= n:
        raise ValueError(f"largest model size k_M={K[-1]} must be < n={n}")
    return K


def _validated(X, K):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d array")
    n = X.shape[0]
    K = check_sizes(K, n)
    if X.shape[1] < K[-1]:
        raise ValueError(f"X has {X.shape[1]} columns but k_M={K[-1]}")
    return X[:, : K[-1]], n, K


def _normalise(R, Xm):
    """Flip signs so that diag(R) > 0 and check the rank condition column by column."""
    k = Xm.shape[1]
    signs = np.where(np.diag(R)[:k] < 0, -1.0, 1.0)
    col_norms = np.linalg.norm(Xm, axis=0)
    diag = np.abs(np.diag(R)[:k])
    for j in range(k):
        ratio = diag[j] / col_norms[j] if col_norms[j] > 0 else 0.0
        if ratio < RANK_TOL:
            raise RankDeficiencyError(j + 1, ratio)
    return signs


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


def factorize(X, K) -> NestedDesign:
    """Thin Householder QR of the largest candidate design.

    Columns beyond ``k_M`` are ignored.  Signs are normalised so that
    ``diag(R) > 0``.
    """
    Xm, n, K = _validated(X, K)
    # LAPACK geqrf + orgqr: Householder reflections
    Q, R = np.linalg.qr(Xm, mode="reduced")
    signs = _normalise(R, Xm)
    Q = Q * signs
    R = R * signs[:, None]
    _freeze(Q, R, K)
    return NestedDesign(n=n, K=K, Q=Q, R=R)


def factorize_with_coords(X, K, *vectors):
    """Factorize and return coordinates of ``vectors`` without forming Q.

    Householder QR of ``[X_M | v_1 ... v_p]``: the leading block of the
    triangular factor is R, and the trailing rows ``:k_M`` of the extra
    columns are ``Q' v_i``.
    """
    Xm, n, K = _validated(X, K)
    k = K[-1]
    V = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
    if V.shape[0] != n:
        raise ValueError(f"vector length {V.shape[0]} does not match n={n}")
    aug = np.empty((n, k + V.shape[1]), order="F")
    aug[:, :k] = Xm
    aug[:, k:] = V
    Raug = np.linalg.qr(aug, mode="r")
    signs = _normalise(Raug, Xm)
    R = Raug[:k, :k] * signs[:, None]
    D = Raug[:k, k:] * signs[:, None]
    sq = np.einsum("ij,ij->j", V, V)
    _freeze(R, K)
    design = NestedDesign(n=n, K=K, Q=None, R=R)
    cs = tuple(ProjectionCoefficients(d=D[:, i].copy(), sq_norm=float(sq[i]), n=n) for i in range(V.shape[1]))
    return design, cs


def coords(design: NestedDesign, v) -> ProjectionCoefficients:
    if design.Q is None:
        raise ValueError("design was factorized without Q")
    v = np.asarray(v, dtype=float)
    if v.shape != (design.n,):
        raise ValueError(f"vector length {v.shape} does not match n={design.n}")
    d = design.Q.T @ v
    d.setflags(write=False)
    return ProjectionCoefficients(d=d, sq_norm=float(v @ v), n=design.n)


def coords_many(design: NestedDesign, *vs):
    """Coordinates for several vectors with a single matrix product."""
    if design.Q is None:
        raise ValueError("design was factorized without Q")
    V = np.column_stack([np.asarray(v, dtype=float) for v in vs])
    if V.shape[0] != design.n:
        raise ValueError(f"vector length {V.shape[0]} does not match n={design.n}")
    D = design.Q.T @ V
    sq = np.einsum("ij,ij->j", V, V)
    return tuple(
        ProjectionCoefficients(d=D[:, i].copy(), sq_norm=float(sq[i]), n=design.n)
        for i in range(V.shape[1])
    )


def _check_model(design, m):
    if not 1 <= m <= design.M:
        raise ValueError(f"model index {m} outside 1..{design.M}")
    return m


def quad_form(design: NestedDesign, c: ProjectionCoefficients, m: int) -> float:
    """``v' P_m v``."""
    k = design.K[_check_model(design, m) - 1]
    return c.prefix(k)


def cross_form(design: NestedDesign, c1, c2, m: int) -> float:
    """``u' P_m v``."""
    if c1.n != c2.n or c1.d.shape != c2.d.shape:
        raise ValueError("coordinate sets come from different designs")
    k = design.K[_check_model(design, m) - 1]
    return float(np.dot(c1.d[:k], c2.d[:k]))


def increments(design: NestedDesign, c1, c2=None) -> np.ndarray:
    """Per-model increments ``u'(P_m - P_{m-1})v`` for m = 1..M (``P_0 = 0``)."""
    prod = c1.d * c1.d if c2 is None else c1.d * c2.d
    cum = np.concatenate(([0.0], np.cumsum(prod)))
    a = cum[design.K]
    return np.diff(np.concatenate(([0.0], a)))


def sigma_hat(design: NestedDesign, c_y: ProjectionCoefficients) -> float:
    """Residual variance estimate from the largest model, clamped at 0."""
    dof = design.n - design.k_max
    if dof <= 0:
        raise ValueError(f"n={design.n} must exceed k_M={design.k_max}")
    rss = c_y.sq_norm - c_y.prefix(design.k_max)
    return max(rss / dof, 0.0)
