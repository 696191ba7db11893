"""Small value types shared by the analysis modules."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace
from typing import Any, Iterable, Optional

import numpy as np


class Status(str, enum.Enum):
    HOLDS = "Holds"
    FAILS = "Fails"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Grid:
    """Uniform sample grid on [t0, T], a finite stand-in for [t0, +inf)."""

    t0: float = 0.0
    T: float = 50.0
    n: int = 1024
    doublings: int = 1

    def __post_init__(self):
        if not self.T > self.t0:
            raise ValueError(f"grid horizon T={self.T} must exceed t0={self.t0}")
        if self.n < 64:
            raise ValueError(f"grid needs at least 64 samples, got n={self.n}")

    @property
    def ts(self) -> np.ndarray:
        return np.linspace(self.t0, self.T, self.n)

    def doubled(self) -> "Grid":
        """Twice the horizon with the same spacing (old samples are kept)."""
        return replace(self, T=self.t0 + 2.0 * (self.T - self.t0), n=2 * self.n - 1)

    def horizons(self) -> list["Grid"]:
        grids = [self]
        for _ in range(self.doublings):
            grids.append(grids[-1].doubled())
        return grids


@dataclass
class Trace:
    ts: np.ndarray
    vs: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.ts = np.asarray(self.ts, dtype=float)
        self.vs = np.asarray(self.vs, dtype=float)
        if self.ts.shape != self.vs.shape:
            raise ValueError("trace times and values differ in length")
        if self.ts.size > 1 and not np.all(np.diff(self.ts) > 0):
            raise ValueError("trace times must be strictly increasing")

    def __len__(self) -> int:
        return self.ts.size

    def to_dict(self) -> dict:
        return {"label": self.label, "t": [float(x) for x in self.ts], "v": [float(x) for x in self.vs]}


@dataclass
class ConditionOutcome:
    status: Status
    evidence: dict[str, Any] = field(default_factory=dict)
    note: str = ""
    trace: Optional[Trace] = field(default=None, repr=False, compare=False)

    @property
    def holds(self) -> bool:
        return self.status is Status.HOLDS


def holds(note: str = "", trace: Trace | None = None, **evidence) -> ConditionOutcome:
    return ConditionOutcome(Status.HOLDS, evidence, note, trace)


def fails(note: str = "", trace: Trace | None = None, **evidence) -> ConditionOutcome:
    return ConditionOutcome(Status.FAILS, evidence, note, trace)


def inconclusive(note: str = "", trace: Trace | None = None, **evidence) -> ConditionOutcome:
    return ConditionOutcome(Status.INCONCLUSIVE, evidence, note, trace)


def all_of(parts: Iterable[tuple[str, ConditionOutcome]], note: str = "") -> ConditionOutcome:
    """Conjunction: Fails if any part fails, Holds if all hold."""
    parts = list(parts)
    evidence = {name: o.status.value for name, o in parts}
    for name, o in parts:
        for k, v in o.evidence.items():
            evidence[f"{name}.{k}"] = v
    notes = [f"{name}: {o.note}" for name, o in parts if o.note]
    text = "; ".join(([note] if note else []) + notes)
    statuses = [o.status for _, o in parts]
    if Status.FAILS in statuses:
        return fails(text, **evidence)
    if all(s is Status.HOLDS for s in statuses):
        return holds(text, **evidence)
    return inconclusive(text, **evidence)


def any_of(statuses: Iterable[Status]) -> Status:
    """Disjunction of alternative condition groups."""
    statuses = list(statuses)
    if Status.HOLDS in statuses:
        return Status.HOLDS
    if Status.INCONCLUSIVE in statuses:
        return Status.INCONCLUSIVE
    return Status.FAILS


@dataclass(frozen=True)
class CriterionConfig:
    """Tolerances and search parameters for the criteria and the oracle."""

    tol_im: float = 1e-9
    tol_nonzero: float = 1e-8
    tol_trend: float = 1e-3
    divergence: float = 40.0
    tol_sign: float = 1e-12
    tol_zero: float = 1e-10
    tol_mono: float = 1e-9
    tol_quad: float = 1e-9
    tol_rh: float = 1e-12
    integral_rel: float = 0.01
    eps_exponents: tuple[float, ...] = (0.5, 0.25, 0.1, 0.05, 0.01)
    alpha_min: float = 1e-3
    use_routh_hurwitz: bool = True
    rtol: float = 1e-10
    atol: float = 1e-12
    vanish_tol: float = 1e-6
    escape_radius: float = 1e8
    max_log_norm: float = 300.0

    def __post_init__(self):
        for name in self.float_fields():
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be positive, got {getattr(self, name)!r}")
        if not self.eps_exponents or not all(0 < e < 1.5 for e in self.eps_exponents):
            raise ValueError("eps_exponents must be a non-empty list of values in (0, 1.5)")

    @classmethod
    def float_fields(cls) -> list[str]:
        return [f.name for f in fields(cls) if f.type in ("float", float)]

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["eps_exponents"] = list(self.eps_exponents)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CriterionConfig":
        d = dict(d)
        if "eps_exponents" in d:
            d["eps_exponents"] = tuple(float(x) for x in d["eps_exponents"])
        return cls(**d)
