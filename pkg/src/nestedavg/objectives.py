r"""Criterion, loss and risk as separable quadratics in tail weights.

For nested models the hat matrices satisfy ``P_m P_l = P_min(m,l)``, so with
``D_m = P_m - P_{m-1}`` (``P_0 = 0``) the averaged hat matrix is

    P(w) = sum_m w_m P_m = sum_m t_m D_m,    t_m = sum_{l >= m} w_l,

and the ``D_m`` are mutually orthogonal projections.  The simplex maps onto
``1 = t_1 >= t_2 >= ... >= t_M >= 0`` and each objective becomes

    f(t) = c0 + sum_m (A_m t_m^2 + B_m t_m).

Writing ``a_m = y'P_m y`` and ``Δ`` for first differences over ``m``
(``a_0 = k_0 = 0``):

=========  ==========================  ==========================  =========
objective  A_m                         B_m                         c0
=========  ==========================  ==========================  =========
criterion  Δa_m                        -2 Δa_m + φ σ̂² Δk_m         ||y||²
loss       Δa_m                        -2 μ'D_m y                  ||μ||²
risk       μ'D_m μ + σ² Δk_m           -2 μ'D_m μ                  ||μ||²
=========  ==========================  ==========================  =========

The risk row uses ``E(e'D_m e) = σ² Δk_m`` and ``E(μ'D_m e) = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateTruthError
from .projection import NestedDesign, ProjectionCoefficients, increments

A_CLAMP = 1e-12


def tail_weights(w):
    """``t_m = sum_{l >= m} w_l``."""
    w = np.asarray(w, dtype=float)
    return np.cumsum(w[..., ::-1], axis=-1)[..., ::-1]


def weights_from_tail(t):
    t = np.asarray(t, dtype=float)
    return t - np.append(t[1:], 0.0)


@dataclass(frozen=True)
class SeparableSimplexObjective:
    A: np.ndarray
    B: np.ndarray
    c0: float
    kind: str = "custom"

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.ndim != 1 or A.shape != B.shape or A.size == 0:
            raise ValueError("A and B must be non-empty 1-d arrays of equal length")
        if np.any(A < -A_CLAMP * max(1.0, float(np.max(np.abs(A))))):
            raise ValueError(f"quadratic coefficients must be nonnegative, got min {A.min()}")
        object.__setattr__(self, "A", np.maximum(A, 0.0))
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c0", float(self.c0))

    @property
    def M(self) -> int:
        return self.A.size

    def at_tail(self, t):
        t = np.asarray(t, dtype=float)
        return self.c0 + (t * t) @ self.A + t @ self.B

    def __call__(self, w):
        return self.at_tail(tail_weights(w))

    def gradient(self, w):
        """Gradient in w-space: ``d f / d w_l = sum_{m <= l} (2 A_m t_m + B_m)``."""
        t = tail_weights(w)
        return np.cumsum(2.0 * self.A * t + self.B)

    def hessian(self):
        """Dense w-space Hessian, the min-matrix ``2 cumsum(A)[min(l, l')]``."""
        cA = 2.0 * np.cumsum(self.A)
        idx = np.arange(self.M)
        return cA[np.minimum.outer(idx, idx)]

    def vertex_values(self):
        """Objective at each unit vector ``w_m^0``: ``t = (1,...,1,0,...,0)``."""
        return self.c0 + np.cumsum(self.A + self.B)

    def restrict_from(self, start):
        """Objective over models ``start+1..M`` with ``t_1..t_{start+1}`` pinned to 1."""
        c0 = self.c0 + float(np.sum(self.A[:start] + self.B[:start]))
        return SeparableSimplexObjective(self.A[start:], self.B[start:], c0, self.kind)


# weight sets ----------------------------------------------------------------

@dataclass(frozen=True)
class Simplex:
    def __str__(self):
        return "simplex"


@dataclass(frozen=True)
class Discrete:
    N: int

    def __str__(self):
        return f"discrete:{self.N}"


@dataclass(frozen=True)
class Restricted:
    delta: float
    tau0: float
    m0: int
    n: int

    @property
    def threshold(self):
        return self.delta * self.n ** (-self.tau0)

    def __str__(self):
        return f"restricted:{self.delta:g},{self.tau0:g}"


@dataclass(frozen=True)
class WeightVector:
    w: np.ndarray
    set_tag: object = field(default_factory=Simplex)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        check_feasible(w, self.set_tag)

    def __len__(self):
        return self.w.size

    def __getitem__(self, i):
        return self.w[i]


def check_feasible(w, tag):
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-d array")
    if np.any(w < 0):
        raise ValueError(f"negative weight {w.min()}")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValueError(f"weights sum to {w.sum()!r}, not 1")
    if isinstance(tag, Discrete):
        scaled = w * tag.N
        if np.max(np.abs(scaled - np.round(scaled))) > 1e-9:
            raise ValueError(f"weights are not multiples of 1/{tag.N}")
    elif isinstance(tag, Restricted):
        s = w[: tag.m0].sum()
        if s != 0.0 and s < tag.threshold - 1e-12:
            raise ValueError(f"under-fitted mass {s} in (0, {tag.threshold})")


def unit_weights(M, m):
    """``w_m^0`` for 1-based ``m``."""
    w = np.zeros(M)
    w[m - 1] = 1.0
    return w


# builders -------------------------------------------------------------------

def build_criterion(design: NestedDesign, c_y: ProjectionCoefficients, phi, s2hat):
    if phi < 0 or s2hat < 0:
        raise ValueError("penalty factor and variance estimate must be nonnegative")
    da = increments(design, c_y)
    dk = np.diff(np.concatenate(([0], design.K)))
    return SeparableSimplexObjective(da, -2.0 * da + phi * s2hat * dk, c_y.sq_norm, "criterion")


def build_loss(design: NestedDesign, c_y, c_mu):
    da = increments(design, c_y)
    dc = increments(design, c_mu, c_y)
    return SeparableSimplexObjective(da, -2.0 * dc, c_mu.sq_norm, "loss")


def build_risk(design: NestedDesign, c_mu, sigma2):
    if not sigma2 > 0:
        raise ValueError("error variance must be positive")
    dg = increments(design, c_mu)
    dk = np.diff(np.concatenate(([0], design.K)))
    return SeparableSimplexObjective(dg + sigma2 * dk, -2.0 * dg, c_mu.sq_norm, "risk")


# decompositions (identities around the true model) --------------

def _check_m0(design, M0):
    if not 1 <= M0 < design.M - 1:
        raise ValueError(f"M0={M0} must satisfy 1 <= M0 < M-1 = {design.M - 1}")


def _cum_forms(design, c1, c2=None):
    """``u'P_m v`` for m = 1..M."""
    return np.cumsum(increments(design, c1, c2))


def _split_coeffs(w, M0):
    """Coefficients multiplying the under- and over-fitted gap terms."""
    w = np.asarray(w, dtype=float)
    under = w[:M0]
    before = np.concatenate(([0.0], np.cumsum(under)[:-1]))
    over = w[M0 + 1:]
    after = tail_weights(over) - over
    return under, under ** 2 + 2 * under * before, over, over ** 2 + 2 * over * after


def loss_decomposition(design, c_y, c_e, M0, w):
    """Loss written around the true model ``M0+1``; needs ``mu`` in span(X_{M0+1})."""
    _check_m0(design, M0)
    yy = _cum_forms(design, c_y)
    ye = _cum_forms(design, c_y, c_e)
    ee = _cum_forms(design, c_e)
    under, cu, _, co = _split_coeffs(w, M0)
    base = ee[M0]
    return float(
        base
        + cu @ (yy[M0] - yy[:M0])
        - 2.0 * under @ (ye[M0] - ye[:M0])
        + co @ (ee[M0 + 1:] - ee[M0])
    )


def risk_decomposition(design, c_mu, sigma2, M0, w):
    _check_m0(design, M0)
    if not sigma2 > 0:
        raise ValueError("error variance must be positive")
    mm = _cum_forms(design, c_mu)
    K = design.K.astype(float)
    under, cu, _, co = _split_coeffs(w, M0)
    gap = K[M0] - K[:M0]
    return float(
        sigma2 * K[M0]
        + cu @ (mm[M0] - mm[:M0] + sigma2 * gap)
        - 2.0 * sigma2 * under @ gap
        + sigma2 * co @ (K[M0 + 1:] - K[M0])
    )


# diagnostics ----------------------------------------------------------------

def eta(beta, K, M0):
    """Squared coefficients between the largest under-fitted and the true model."""
    K = np.asarray(K, dtype=int)
    if not 1 <= M0 < len(K):
        raise ValueError(f"M0={M0} out of range for {len(K)} models")
    lo, hi = K[M0 - 1], K[M0]
    b = np.zeros(hi)
    beta = np.asarray(beta, dtype=float)[:hi]
    b[: beta.size] = beta
    return float(np.sum(b[lo:hi] ** 2))


def kappa0(design, M0):
    """Smallest eigenvalue of ``X_{M0+1}'X_{M0+1} / n``."""
    k = design.K[M0]
    Rk = design.R[:k, :k]
    return float(np.linalg.eigvalsh(Rk.T @ Rk / design.n)[0])


def psi_k(design, c_mu, M0):
    M = design.M
    K = design.K.astype(float)
    growth = np.sum(np.diff(K) / (4.0 * K[:-1]))
    dmu = increments(design, c_mu)
    cum = np.cumsum(dmu)
    signal = 0.0
    for m in range(1, M0 + 1):
        signal += dmu[m - 1] / (4.0 * (cum[M0] - cum[m - 1]))
    return float(min(M, 1.0 + growth + signal) * (1.0 + np.log(M)) ** 2)


def unit_direction(design, c_mu, M0):
    """Plug-in unit vector ``v`` with ``Q`` replaced by ``X'X/n`` of the true model."""
    k1, k0 = design.K[M0], design.K[M0 - 1]
    Rk = design.R[:k1, :k1]
    beta = np.linalg.solve(Rk, c_mu.d[:k1])
    Qh = Rk.T @ Rk / design.n
    Q11, Q12 = Qh[:k0, :k0], Qh[:k0, k0:]
    Q21, Q22 = Qh[k0:, :k0], Qh[k0:, k0:]
    S = Q22 - Q21 @ np.linalg.solve(Q11, Q12)
    bc = beta[k0:]
    denom = float(bc @ S @ bc)
    if denom <= 0:
        raise DegenerateTruthError("true mean has no component between models M0 and M0+1")
    evals, evecs = np.linalg.eigh(Qh)
    inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
    v = inv_sqrt @ np.concatenate((np.zeros(k0), S @ bc)) / np.sqrt(denom)
    return v / np.linalg.norm(v)


class Diagnostics(NamedTuple):
    kappa0: float
    xi_n: float
    psi_K: float
    v: np.ndarray


def diagnostics(design, c_mu, sigma2, M0):
    if not 1 <= M0 < design.M:
        raise ValueError(f"M0={M0} out of range for {design.M} models")
    from .solver import solve_simplex

    gap = float(np.sum(c_mu.d[design.K[M0 - 1]:design.K[M0]] ** 2))
    if gap <= 1e-14 * max(c_mu.sq_norm, 1e-300):
        raise DegenerateTruthError("mu'(P_{M0+1} - P_{M0})mu = 0; v is undefined")
    xi = solve_simplex(build_risk(design, c_mu, sigma2)).objective_value
    return Diagnostics(
        kappa0=kappa0(design, M0),
        xi_n=xi,
        psi_K=psi_k(design, c_mu, M0),
        v=unit_direction(design, c_mu, M0),
    )


def signal_gap_bound(design, c_mu, beta, M0, m):
    """Both sides of ``mu'(P_{M0+1} - P_m)mu >= kappa0 n sum_{window} beta_j^2``."""
    if not 1 <= m <= M0:
        raise ValueError(f"m={m} must lie in 1..M0={M0}")
    lo, hi = design.K[m - 1], design.K[M0]
    lhs = float(np.sum(c_mu.d[lo:hi] ** 2))
    b = np.zeros(hi)
    beta = np.asarray(beta, dtype=float)[:hi]
    b[: beta.size] = beta
    rhs = kappa0(design, M0) * design.n * float(np.sum(b[lo:hi] ** 2))
    return lhs, rhs
