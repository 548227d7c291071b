"""Experiment configuration: a flat ``key = value`` text file.

Lists are whitespace separated.  Example::

    scenario = fixed
    n = 1000 2000
    r2 = 0.5 0.9
    reps = 1000
    seed = 12345
    phi = mma logn
    weight_sets = simplex discrete:2 restricted:0.1,0.25
    threads = 4
    out = results/fixed
    full = false

``rho`` is optional and overrides the scenario's covariate correlation.
Lines starting with ``#`` are comments.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

from .dgp import SCENARIOS, make_scenario
from .montecarlo import parse_weight_set, phi_value

DESK_MAX_N = 10_000
DESK_MAX_REPS = 10_000

KEYS = ("scenario", "n", "r2", "rho", "reps", "seed", "phi", "weight_sets", "threads", "out", "full")


class ConfigError(ValueError):
    """Raised with every offending field listed."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config: " + "; ".join(self.problems))


def _fmt_float(x):
    return repr(float(x))


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "fixed"
    n: tuple = (1000,)
    r2: tuple = (0.5,)
    rho: float | None = None
    reps: int = 1000
    seed: int = 20240101
    phi: tuple = ("mma", "logn")
    weight_sets: tuple = ("simplex",)
    threads: int = 1
    out: str = "results"
    full: bool = False

    def specs(self):
        """Scenario specs for every (r2, n) pair, r2-major."""
        r2s = self.r2 if self.r2 else (None,)
        return [make_scenario(self.scenario, n, r2, rho=self.rho) for r2 in r2s for n in self.n]

    def validate(self):
        problems = []
        if self.scenario not in SCENARIOS or self.scenario == "custom":
            problems.append(f"scenario: unknown or unsupported {self.scenario!r}")
        if not self.n:
            problems.append("n: at least one sample size is required")
        if any(n < 1 for n in self.n):
            problems.append("n: sample sizes must be positive")
        if self.reps < 1:
            problems.append("reps: must be >= 1")
        if self.threads < 1:
            problems.append("threads: must be >= 1")
        if not self.phi:
            problems.append("phi: at least one penalty factor is required")
        for p in self.phi:
            try:
                phi_value(p, 100)
            except ValueError as exc:
                problems.append(f"phi: {exc}")
        if not self.weight_sets:
            problems.append("weight_sets: at least one weight set is required")
        for ws in self.weight_sets:
            try:
                parse_weight_set(ws)
            except ValueError as exc:
                problems.append(f"weight_sets: {exc}")
        if self.rho is not None and not abs(self.rho) < 1:
            problems.append("rho: must satisfy |rho| < 1")
        if self.scenario == "toy" and self.r2:
            problems.append("r2: the toy scenario fixes the error variance and takes no r2")
        if self.scenario != "toy" and not self.r2:
            problems.append(f"r2: scenario {self.scenario!r} needs at least one r2")
        if not self.full:
            if any(n > DESK_MAX_N for n in self.n):
                problems.append(f"n: values above {DESK_MAX_N} need full = true")
            if self.reps > DESK_MAX_REPS:
                problems.append(f"reps: values above {DESK_MAX_REPS} need full = true")
        if not problems:
            try:
                self.specs()
            except ValueError as exc:
                problems.append(f"scenario/n/r2: {exc}")
        if problems:
            raise ConfigError(problems)
        return self

    # text form -------------------------------------------------------------

    def to_text(self):
        lines = [
            f"scenario = {self.scenario}",
            "n = " + " ".join(str(n) for n in self.n),
            "r2 = " + " ".join(_fmt_float(r) for r in self.r2),
        ]
        if self.rho is not None:
            lines.append(f"rho = {_fmt_float(self.rho)}")
        lines += [
            f"reps = {self.reps}",
            f"seed = {self.seed}",
            "phi = " + " ".join(self.phi),
            "weight_sets = " + " ".join(self.weight_sets),
            f"threads = {self.threads}",
            f"out = {self.out}",
            f"full = {'true' if self.full else 'false'}",
        ]
        return "\n".join(lines) + "\n"

    def hash(self):
        """Digest of the settings that determine results (threads and out excluded)."""
        key = replace(self, threads=1, out="")
        return hashlib.sha256(key.to_text().encode()).hexdigest()[:16]

    @classmethod
    def from_text(cls, text):
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep:
                raise ConfigError([f"line {lineno}: expected 'key = value'"])
            if key not in KEYS:
                raise ConfigError([f"line {lineno}: unknown key {key!r}"])
            raw[key] = value.strip()
        return cls.from_mapping(raw)

    @classmethod
    def from_mapping(cls, raw):
        """Build from string values (file entries or command-line overrides)."""
        kw, problems = {}, []
        conv = {
            "scenario": str,
            "n": lambda v: tuple(int(x) for x in v.split()),
            "r2": lambda v: tuple(float(x) for x in v.split()),
            "rho": lambda v: float(v) if v.strip() else None,
            "reps": int,
            "seed": int,
            "phi": lambda v: tuple(v.split()),
            "weight_sets": lambda v: tuple(v.split()),
            "threads": int,
            "out": str,
            "full": _parse_bool,
        }
        for key, value in raw.items():
            if value is None:
                continue
            try:
                kw[key] = conv[key](value) if isinstance(value, str) else value
            except (ValueError, KeyError) as exc:
                problems.append(f"{key}: cannot parse {value!r} ({exc})")
        if problems:
            raise ConfigError(problems)
        return cls(**kw)

    def updated(self, **overrides):
        """Copy with string or typed overrides; ``None`` values are ignored."""
        merged = {k: v for k, v in overrides.items() if v is not None}
        parsed = ExperimentConfig.from_mapping(merged)
        return replace(self, **{k: getattr(parsed, k) for k in merged})


def _parse_bool(v):
    if isinstance(v, bool):
        return v
    v = v.strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def load_config(path):
    with open(path) as fh:
        return ExperimentConfig.from_text(fh.read())
