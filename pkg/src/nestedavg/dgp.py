"""Simulation designs: AR(1) Gaussian covariates, R^2-calibrated noise, seeding."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .projection import check_sizes

SCENARIOS = ("toy", "fixed", "div1", "div2", "custom")


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    n: int
    rho: float
    beta: tuple
    K: tuple
    sigma2: float
    r2: float | None = None
    M0: int = field(default=-1)

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.name!r}")
        if abs(self.rho) >= 1:
            raise ValueError(f"|rho| must be < 1, got {self.rho}")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        K = check_sizes(self.K, self.n)
        object.__setattr__(self, "K", tuple(int(k) for k in K))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        m0 = derive_m0(self.beta, self.K)
        if self.M0 >= 0 and self.M0 != m0:
            raise ValueError(f"declared M0={self.M0} but coefficients imply M0={m0}")
        object.__setattr__(self, "M0", m0)
        if self.name != "custom":
            if m0 < 1 or len(self.K) <= m0 + 1:
                raise ValueError(
                    f"need at least one under- and one over-fitted model (M0={m0}, M={len(self.K)})"
                )

    @property
    def M(self):
        return len(self.K)

    @property
    def k_max(self):
        return self.K[-1]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["beta"] = tuple(d["beta"])
        d["K"] = tuple(d["K"])
        return cls(**d)


def derive_m0(beta, K):
    """Index M0 such that model M0+1 is the smallest one containing every nonzero coefficient."""
    beta = np.asarray(beta, dtype=float)
    nz = np.nonzero(beta)[0]
    if nz.size == 0:
        raise ValueError("coefficients are all zero")
    last = nz[-1] + 1
    K = np.asarray(K)
    if last > K[-1]:
        raise ValueError(f"nonzero coefficient {last} lies outside the largest model")
    return int(np.searchsorted(K, last))


def gen_covariates(n, p, rho, rng):
    """Rows are stationary AR(1) in the column index: ``corr(x_k, x_l) = rho^|k-l|``.

    Innovations are drawn column by column (a ``p x n`` block), so the result
    is Fortran-ordered.
    """
    if abs(rho) >= 1:
        raise ValueError(f"|rho| must be < 1, got {rho}")
    Z = rng.standard_normal((p, n))
    if rho != 0 and p > 1:
        Z[1:] *= math.sqrt(1.0 - rho * rho)
        for j in range(1, p):
            Z[j] += rho * Z[j - 1]
    return Z.T


def sigma2_from_r2(beta, rho, r2):
    """Error variance giving population ``R^2 = Var(mu) / (Var(mu) + sigma^2)``."""
    if not 0 < r2 < 1:
        raise ValueError(f"r2 must lie in (0, 1), got {r2}")
    beta = np.asarray(beta, dtype=float)
    if not np.any(beta):
        raise ValueError("coefficients are all zero")
    idx = np.arange(beta.size)
    cov = rho ** np.abs(np.subtract.outer(idx, idx)) if rho != 0 else np.eye(beta.size)
    var_mu = float(beta @ cov @ beta)
    return var_mu * (1.0 - r2) / r2


def _rule(name, n):
    if name == "toy":
        return 0.0, (-1.0, 0.1, 0.0), (1, 2, 3)
    if name == "fixed":
        return 0.5, (1.0, -2.0, 3.0, 1.5, 4.0), tuple(range(1, 12))
    if name == "div1":
        p = math.floor(2 * n ** (1 / 3) + 1e-9)
        if p < 4:
            raise ValueError(f"div1 needs floor(2 n^(1/3)) >= 4 so that k_1 >= 1 (n={n})")
        beta = tuple(1.0 / j for j in range(1, p)) + (1.0,)
        return 0.5, beta, tuple(range(p - 3, p + 6))
    if name == "div2":
        if n <= math.e:
            raise ValueError(f"div2 needs log log n > 0 (n={n})")
        p = math.floor(math.log(n))
        if p < 2:
            raise ValueError(f"div2 needs floor(log n) >= 2 so that M0 >= 1 (n={n})")
        beta = tuple(1.0 / j for j in range(1, p)) + (5.0 / math.log(math.log(n)),)
        return 0.5, beta, tuple(range(1, p + 4))
    raise ValueError(f"no built-in rule for scenario {name!r}")


def make_scenario(name, n, r2=None, rho=None, sigma2=None):
    """Built-in designs.  ``toy`` has unit error variance and rejects ``r2``."""
    rho0, beta, K = _rule(name, n)
    if K[-1] >= n:
        raise ValueError(f"n={n} must exceed the largest model size {K[-1]}")
    rho = rho0 if rho is None else float(rho)
    if name == "toy":
        if r2 is not None:
            raise ValueError("the toy scenario fixes sigma2 = 1; r2 is not accepted")
        return ScenarioSpec(name, n, rho, beta, K, 1.0 if sigma2 is None else sigma2)
    if sigma2 is None:
        if r2 is None:
            raise ValueError(f"scenario {name!r} needs r2 or sigma2")
        sigma2 = sigma2_from_r2(beta, rho, r2)
    return ScenarioSpec(name, n, rho, beta, K, sigma2, r2)


@dataclass(frozen=True)
class GeneratedData:
    X: np.ndarray
    mu: np.ndarray
    y: np.ndarray
    e: np.ndarray
    sigma2: float
    spec: ScenarioSpec


def rep_rng(master_seed, rep_index):
    """Replication stream: SeedSequence hashes the (seed, rep) pair into PCG64 state."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(master_seed), int(rep_index)])))


def generate(spec: ScenarioSpec, rep_index, master_seed) -> GeneratedData:
    """Draw covariates, then errors, from the replication's own stream."""
    rng = rep_rng(master_seed, rep_index)
    X = gen_covariates(spec.n, spec.k_max, spec.rho, rng)
    beta = np.zeros(spec.k_max)
    beta[: len(spec.beta)] = spec.beta[: spec.k_max]
    kt = spec.K[spec.M0]
    mu = X[:, :kt] @ beta[:kt]
    e = math.sqrt(spec.sigma2) * rng.standard_normal(spec.n)
    return GeneratedData(X=X, mu=mu, y=mu + e, e=e, sigma2=spec.sigma2, spec=spec)
