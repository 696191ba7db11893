"""Job configuration: a sectioned ``key = value`` file read with configparser.

Example::

    [system]
    a = "-1"
    b = "2 + sin(t)"
    c = "1"
    d = "-1"
    t0 = 0

    [grid]
    T = 50
    n = 1024
    doublings = 1

    [tolerances]
    tol_trend = 1e-3

    [output]
    format = json
    path = -
    dump_traces = false
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Optional

from .core import CriterionConfig, Grid
from .expr import ParseError, parse
from .reduction import SystemSpec


class ConfigError(ValueError):
    """Unreadable or invalid job configuration."""


SECTIONS = ("system", "grid", "tolerances", "output")
FORMATS = ("json", "csv")


@dataclass(frozen=True)
class OutputConfig:
    format: str = "json"
    path: str = "-"
    dump_traces: bool = False


@dataclass(frozen=True)
class JobConfig:
    sources: dict  # coefficient name -> expression text
    t0: float
    grid: Grid
    criteria: CriterionConfig = field(default_factory=CriterionConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def system(self) -> SystemSpec:
        return SystemSpec(*(parse(self.sources[k]) for k in "abcd"), self.t0)

    def echo(self) -> dict:
        """Configuration echo for reports (no file paths)."""
        g = self.grid
        return {
            "system": {**{k: self.sources[k] for k in "abcd"}, "t0": self.t0},
            "grid": {"T": g.T, "n": g.n, "doublings": g.doublings},
            "tolerances": self.criteria.to_dict(),
            "output": {"format": self.output.format, "dump_traces": self.output.dump_traces},
        }


def _unquote(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def _parse_bool(key: str, text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _parse_float(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _parse_int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def check_expression(key: str, text: str) -> None:
    """Raise :class:`ConfigError` with a caret diagnostic on a syntax error."""
    try:
        parse(text)
    except ParseError as exc:
        caret = " " * exc.offset + "^"
        raise ConfigError(f"{key}: {exc}\n    {text}\n    {caret}") from None


def tolerance_value(key: str, text: str):
    """Convert a tolerance override to the field's type."""
    kinds = {f.name: f.type for f in fields(CriterionConfig)}
    if key not in kinds:
        raise ConfigError(f"unknown tolerance {key!r}; known: {', '.join(sorted(kinds))}")
    kind = kinds[key]
    if kind in ("bool", bool):
        return _parse_bool(key, text)
    if key == "eps_exponents":
        return tuple(_parse_float(key, x) for x in text.replace(",", " ").split())
    return _parse_float(key, text)


def build_criteria(values: dict) -> CriterionConfig:
    try:
        return CriterionConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"tolerances: {exc}") from None


def build_grid(t0: float, T: float, n: int, doublings: int) -> Grid:
    if doublings < 0:
        raise ConfigError("grid.doublings must be >= 0")
    try:
        return Grid(t0, T, n, doublings)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None


def parse_config_text(text: str, source: str = "<config>", base: Optional[dict] = None) -> JobConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep "T" distinct from "t"
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{sec}]; expected {', '.join(SECTIONS)}")
    return config_from_sections({sec: dict(cp[sec]) for sec in cp.sections()}, source)


def config_from_sections(secs: dict[str, dict], source: str = "<config>") -> JobConfig:
    sysd = dict(secs.get("system", {}))
    missing = [k for k in "abcd" if k not in sysd]
    if missing:
        raise ConfigError(f"{source}: [system] is missing {', '.join(missing)}")
    sources = {}
    for k in "abcd":
        sources[k] = _unquote(sysd.pop(k))
        check_expression(f"system.{k}", sources[k])
    t0 = _parse_float("system.t0", sysd.pop("t0", "0"))
    if sysd:
        raise ConfigError(f"{source}: unknown keys in [system]: {', '.join(sorted(sysd))}")

    g = dict(secs.get("grid", {}))
    T = _parse_float("grid.T", g.pop("T", str(t0 + 50.0)))
    n = _parse_int("grid.n", g.pop("n", "1024"))
    doublings = _parse_int("grid.doublings", g.pop("doublings", "1"))
    if g:
        raise ConfigError(f"{source}: unknown keys in [grid]: {', '.join(sorted(g))}")
    grid = build_grid(t0, T, n, doublings)

    tol = {k: tolerance_value(k, v) for k, v in secs.get("tolerances", {}).items()}
    criteria = build_criteria(tol)

    o = dict(secs.get("output", {}))
    fmt = o.pop("format", "json").strip().lower()
    if fmt not in FORMATS:
        raise ConfigError(f"output.format must be one of {', '.join(FORMATS)}, got {fmt!r}")
    out = OutputConfig(fmt, o.pop("path", "-").strip(), _parse_bool("output.dump_traces", o.pop("dump_traces", "false")))
    if o:
        raise ConfigError(f"{source}: unknown keys in [output]: {', '.join(sorted(o))}")
    return JobConfig(sources, t0, grid, criteria, out)


def load_config(path: str | Path) -> JobConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text, str(path))


def apply_overrides(
    job: JobConfig,
    horizon: Optional[float] = None,
    n: Optional[int] = None,
    tols: Iterable[str] = (),
    fmt: Optional[str] = None,
    dump_traces: Optional[bool] = None,
    path: Optional[str] = None,
) -> JobConfig:
    """Apply command-line flag overrides (``--tol KEY=VAL`` pairs etc.)."""
    grid = job.grid
    if horizon is not None or n is not None:
        grid = build_grid(grid.t0, horizon if horizon is not None else grid.T, n if n is not None else grid.n, grid.doublings)
    crit = job.criteria
    pairs = list(tols)
    if pairs:
        values = crit.to_dict()
        for item in pairs:
            if "=" not in item:
                raise ConfigError(f"--tol expects KEY=VAL, got {item!r}")
            key, val = item.split("=", 1)
            values[key.strip()] = tolerance_value(key.strip(), val.strip())
        crit = build_criteria(values)
    out = job.output
    if fmt is not None:
        if fmt not in FORMATS:
            raise ConfigError(f"--output must be one of {', '.join(FORMATS)}")
        out = replace(out, format=fmt)
    if dump_traces:
        out = replace(out, dump_traces=True)
    if path is not None:
        out = replace(out, path=path)
    return replace(job, grid=grid, criteria=crit, output=out)
