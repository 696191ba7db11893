"""Serializable analysis report.

The JSON payload is deterministic: keys in a fixed order, floats rounded to
12 significant digits, no timestamps. ``Report.from_dict(r.to_dict()) == r``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Union

from .core import ConditionOutcome
from .criteria import Classification, ConditionReport, Verdict
from .oracle import Empirical, EmpiricalClass
from .expr import to_string
from .reduction import ReducedSystem

SCHEMA = "ltvstab.report/1"
NA = "n/a"


def clean(x: Any) -> Any:
    """JSON-safe, platform-stable representation of evidence values."""
    if isinstance(x, enum.Enum):
        return x.value
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, int):
        return x
    if isinstance(x, complex):
        return clean(x.real) if x.imag == 0 else [clean(x.real), clean(x.imag)]
    try:
        f = float(x)
    except (TypeError, ValueError):
        return str(x)
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    f = float(f"{f:.12g}")
    return 0.0 if f == 0 else f


def clean_tree(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): clean_tree(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean_tree(v) for v in x]
    return clean(x)


@dataclass
class OutcomeEntry:
    label: str
    status: str
    note: str = ""
    evidence: dict = field(default_factory=dict)

    @classmethod
    def of(cls, label: str, o: ConditionOutcome) -> "OutcomeEntry":
        return cls(label, o.status.value, o.note, clean_tree(o.evidence))

    def to_dict(self) -> dict:
        return {"label": self.label, "status": self.status, "note": self.note, "evidence": self.evidence}

    @classmethod
    def from_dict(cls, d: dict) -> "OutcomeEntry":
        return cls(d["label"], d["status"], d.get("note", ""), dict(d.get("evidence", {})))


@dataclass
class TheoremEntry:
    theorem: str
    applicable: str
    conclusion: Optional[str]
    note: str
    conditions: list[OutcomeEntry]
    lyapunov: list[OutcomeEntry]
    asymptotic: list[OutcomeEntry]

    @classmethod
    def of(cls, r: ConditionReport) -> "TheoremEntry":
        return cls(
            r.theorem,
            r.applicable.value,
            r.conclusion.value if r.conclusion is not None else None,
            r.note,
            [OutcomeEntry.of(l, o) for l, o in r.conditions],
            [OutcomeEntry.of(l, o) for l, o in r.lyapunov],
            [OutcomeEntry.of(l, o) for l, o in r.asymptotic],
        )

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "applicable": self.applicable,
            "conclusion": self.conclusion,
            "note": self.note,
            "conditions": [c.to_dict() for c in self.conditions],
            "lyapunov": [c.to_dict() for c in self.lyapunov],
            "asymptotic": [c.to_dict() for c in self.asymptotic],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TheoremEntry":
        lst = lambda key: [OutcomeEntry.from_dict(x) for x in d.get(key, [])]
        return cls(d["theorem"], d["applicable"], d.get("conclusion"), d.get("note", ""), lst("conditions"), lst("lyapunov"), lst("asymptotic"))


@dataclass
class VerdictEntry:
    classification: str
    decided_by: Optional[str]
    reason: str
    horizon_classes: list[str]

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "decided_by": self.decided_by,
            "reason": self.reason,
            "horizon_classes": list(self.horizon_classes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VerdictEntry":
        return cls(d["classification"], d.get("decided_by"), d.get("reason", ""), list(d.get("horizon_classes", [])))


@dataclass
class OracleEntry:
    empirical: str
    growth_rate: Any
    note: str

    def to_dict(self) -> dict:
        return {"empirical": self.empirical, "growth_rate": self.growth_rate, "note": self.note}

    @classmethod
    def from_dict(cls, d: dict) -> "OracleEntry":
        return cls(d["empirical"], d.get("growth_rate"), d.get("note", ""))


@dataclass
class Report:
    config: dict
    reduced: dict
    sign_case: Optional[str]
    verdict: VerdictEntry
    theorems: list[TheoremEntry]
    oracle: Optional[OracleEntry] = None
    agreement: Union[bool, str, None] = None
    traces: Optional[dict] = None
    schema: str = SCHEMA

    def to_dict(self) -> dict:
        d = {
            "schema": self.schema,
            "config": self.config,
            "reduced": self.reduced,
            "sign_case": self.sign_case,
            "verdict": self.verdict.to_dict(),
            "theorems": [t.to_dict() for t in self.theorems],
            "oracle": self.oracle.to_dict() if self.oracle is not None else None,
            "agreement": self.agreement,
        }
        if self.traces is not None:
            d["traces"] = self.traces
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(
            d["config"],
            d["reduced"],
            d.get("sign_case"),
            VerdictEntry.from_dict(d["verdict"]),
            [TheoremEntry.from_dict(t) for t in d.get("theorems", [])],
            OracleEntry.from_dict(d["oracle"]) if d.get("oracle") is not None else None,
            d.get("agreement"),
            d.get("traces"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Report":
        return cls.from_dict(json.loads(text))


def reduced_strings(red: Optional[ReducedSystem]) -> dict:
    if red is None:
        return {}
    return {name: to_string(getattr(red, name)) for name in ("S", "D1", "D2", "G1", "G2")}


def agreement(classification: str, empirical: str) -> Union[bool, str]:
    """Compatibility of a verdict with an empirical class (``"n/a"`` if either is undecided)."""
    if classification == Classification.INCONCLUSIVE.value or empirical == Empirical.AMBIGUOUS.value:
        return NA
    allowed = {
        Classification.ASYMPTOTICALLY_STABLE.value: {Empirical.VANISHING.value},
        Classification.LYAPUNOV_STABLE.value: {Empirical.BOUNDED.value, Empirical.VANISHING.value},
        Classification.NOT_STABLE.value: {Empirical.UNBOUNDED.value},
    }
    if classification not in allowed:
        raise ValueError(f"unknown classification {classification!r}")
    return empirical in allowed[classification]


def collect_traces(verdict: Verdict) -> dict:
    out = {}
    for rep in verdict.reports:
        groups = (("condition", rep.conditions), ("lyapunov", rep.lyapunov), ("asymptotic", rep.asymptotic))
        for group, items in groups:
            for label, o in items:
                if o.trace is not None:
                    key = f"{rep.theorem}/{group}/{label}"
                    out[key] = {"t": clean_tree(list(o.trace.ts)), "v": clean_tree(list(o.trace.vs))}
    return out


def build_report(
    echo: dict,
    verdict: Verdict,
    red: Optional[ReducedSystem] = None,
    empirical: Optional[EmpiricalClass] = None,
    dump_traces: bool = False,
) -> Report:
    ve = VerdictEntry(verdict.classification.value, verdict.decided_by, verdict.reason, list(verdict.horizon_classes))
    oracle = None
    agree = None
    if empirical is not None:
        oracle = OracleEntry(empirical.kind.value, clean(empirical.growth_rate), empirical.note)
        agree = agreement(ve.classification, oracle.empirical)
    return Report(
        clean_tree(echo),
        reduced_strings(red),
        verdict.sign_case,
        ve,
        [TheoremEntry.of(r) for r in verdict.reports],
        oracle,
        agree,
        collect_traces(verdict) if dump_traces else None,
    )
