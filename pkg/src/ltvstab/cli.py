"""Command line entry point: ``ltvstab analyze|simulate|compare|sweep``.

Exit codes: 0 finished (including Inconclusive verdicts), 2 configuration or
applicability error, 3 integrator failure, 4 verdict contradicts the
numerical reference.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, JobConfig, apply_overrides, config_from_sections, load_config
from .criteria import Verdict, classify
from .oracle import EmpiricalClass, IntegrationError, empirical_for, integrate_fundamental, liouville_residual
from .reduction import ApplicabilityError, ReducedSystem, reduce
from .report import Report, agreement, build_report

EXIT_OK, EXIT_CONFIG, EXIT_INTEGRATOR, EXIT_DISAGREE = 0, 2, 3, 4

SIMULATE_HEADER = [
    "t",
    "phi11_re",
    "phi11_im",
    "phi12_re",
    "phi12_im",
    "phi21_re",
    "phi21_im",
    "phi22_re",
    "phi22_im",
    "norm",
    "liouville_residual",
]
ANALYZE_HEADER = ["section", "theorem", "label", "status", "note"]
SWEEP_HEADER = ["case", "verdict", "empirical", "agreement", "decided_by", "wall_time", "error"]


def _err(msg: str) -> None:
    print(f"ltvstab: {msg}", file=sys.stderr)


def _write(text: str, path: str) -> None:
    if path in ("", "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(path).write_text(text)


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# pipelines shared by the commands


@dataclass
class Analysis:
    verdict: Verdict
    red: Optional[ReducedSystem]
    empirical: Optional[EmpiricalClass] = None


def run_analysis(job: JobConfig) -> Analysis:
    system = job.system
    verdict = classify(system, job.grid, job.criteria)
    red = None
    if not verdict.applicability_error:
        try:
            red = reduce(system, tol_nonzero=job.criteria.tol_nonzero)
        except ApplicabilityError:
            red = None
    return Analysis(verdict, red)


def run_compare(job: JobConfig) -> Analysis:
    """Analysis plus the empirical class (may raise IntegrationError)."""
    result = run_analysis(job)
    if not result.verdict.applicability_error:
        result.empirical, _ = empirical_for(job.system, job.grid, job.criteria)
    return result


def analyze_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ANALYZE_HEADER)
    v = report.verdict
    w.writerow(["verdict", v.decided_by or "", report.sign_case or "", v.classification, v.reason])
    for th in report.theorems:
        for section, items in (("condition", th.conditions), ("lyapunov", th.lyapunov), ("asymptotic", th.asymptotic)):
            for e in items:
                w.writerow([section, th.theorem, e.label, e.status, e.note])
    if report.oracle is not None:
        w.writerow(["oracle", "", "", report.oracle.empirical, report.oracle.note])
        w.writerow(["agreement", "", "", str(report.agreement).lower() if isinstance(report.agreement, bool) else report.agreement, ""])
    return buf.getvalue()


def _emit_report(report: Report, job: JobConfig) -> None:
    text = report.to_json() if job.output.format == "json" else analyze_csv(report)
    _write(text, job.output.path)


def _load(args) -> JobConfig:
    if not args.config:
        raise ConfigError("--config PATH is required")
    job = load_config(args.config)
    return apply_overrides(
        job,
        horizon=args.horizon,
        n=args.grid,
        tols=args.tol or (),
        fmt=args.output,
        dump_traces=args.dump_traces,
        path=args.out,
    )


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args) -> int:
    try:
        job = _load(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    result = run_analysis(job)
    report = build_report(job.echo(), result.verdict, result.red, None, job.output.dump_traces)
    _emit_report(report, job)
    if result.verdict.applicability_error:
        _err(result.verdict.reason)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        job = _load(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    system = job.system
    try:
        fm = integrate_fundamental(system, job.grid, job.criteria.rtol, job.criteria.atol, job.criteria.max_log_norm)
    except IntegrationError as exc:
        _err(f"integration failed: {exc}")
        return EXIT_INTEGRATOR
    ok = fm.valid
    norms = fm.norms()
    resid = liouville_residual(fm, system)
    # Trajectories default to CSV; the config's format applies to reports.
    if getattr(args, "output", None) == "json":
        cols = {name: [] for name in SIMULATE_HEADER}
        for k in np.nonzero(ok)[0]:
            row = _sim_row(fm, norms, resid, k)
            for name, val in zip(SIMULATE_HEADER, row):
                cols[name].append(val)
        _write(json.dumps({"status": fm.status, "t_stop": fm.t_stop, "columns": cols}, indent=2) + "\n", job.output.path)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SIMULATE_HEADER)
        for k in np.nonzero(ok)[0]:
            w.writerow([_fmt(x) for x in _sim_row(fm, norms, resid, k)])
        _write(buf.getvalue(), job.output.path)
    if fm.status == "capped":
        _err(f"norm exceeded exp({job.criteria.max_log_norm:g}); output stops at t={fm.t_stop:.6g}")
    return EXIT_OK


def _sim_row(fm, norms, resid, k) -> list[float]:
    p = fm.phi[k]
    return [
        float(fm.ts[k]),
        p[0, 0].real,
        p[0, 0].imag,
        p[0, 1].real,
        p[0, 1].imag,
        p[1, 0].real,
        p[1, 0].imag,
        p[1, 1].real,
        p[1, 1].imag,
        float(norms[k]),
        float(resid[k]),
    ]


def _recheck_report(path: str) -> int:
    try:
        report = Report.from_json(Path(path).read_text())
    except (OSError, ValueError, KeyError) as exc:
        _err(f"cannot read report {path}: {exc}")
        return EXIT_CONFIG
    if report.oracle is None:
        _err("report has no oracle section to compare against")
        return EXIT_CONFIG
    agree = agreement(report.verdict.classification, report.oracle.empirical)
    print(f"verdict={report.verdict.classification} empirical={report.oracle.empirical} agreement={_agree_text(agree)}")
    return EXIT_DISAGREE if agree is False else EXIT_OK


def _agree_text(a) -> str:
    return str(a).lower() if isinstance(a, bool) else str(a)


def cmd_compare(args) -> int:
    if args.report:
        return _recheck_report(args.report)
    try:
        job = _load(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    try:
        result = run_compare(job)
    except IntegrationError as exc:
        _err(f"integration failed: {exc}")
        return EXIT_INTEGRATOR
    report = build_report(job.echo(), result.verdict, result.red, result.empirical, job.output.dump_traces)
    _emit_report(report, job)
    if result.verdict.applicability_error:
        _err(result.verdict.reason)
        return EXIT_CONFIG
    if report.agreement is False:
        _err(f"verdict {report.verdict.classification} contradicts empirical class {report.oracle.empirical}")
        return EXIT_DISAGREE
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

CASE_GRID_KEYS = ("T", "n", "doublings")


def _case_job(section: dict, base_dir: Path, overrides: dict) -> JobConfig:
    section = dict(section)
    if "config" in section:
        ref = section.pop("config").strip().strip("\"'")
        job = load_config(base_dir / ref)
        extra = {k: section.pop(k) for k in list(section) if k in CASE_GRID_KEYS}
        if section:
            raise ConfigError(f"unexpected keys next to config: {', '.join(sorted(section))}")
        if extra:
            job = apply_overrides(
                job,
                horizon=float(extra["T"]) if "T" in extra else None,
                n=int(extra["n"]) if "n" in extra else None,
            )
            if "doublings" in extra:
                job = replace(job, grid=replace(job.grid, doublings=int(extra["doublings"])))
    else:
        secs = {"system": {}, "grid": {}, "tolerances": {}}
        for k, v in section.items():
            if k in ("a", "b", "c", "d", "t0"):
                secs["system"][k] = v
            elif k in CASE_GRID_KEYS:
                secs["grid"][k] = v
            else:
                secs["tolerances"][k] = v
        job = config_from_sections(secs, "case")
    return apply_overrides(job, horizon=overrides.get("horizon"), n=overrides.get("grid"), tols=overrides.get("tols", ()))


def _run_case(item) -> dict:
    case_id, section, base_dir, overrides = item
    row = {"case": case_id, "verdict": "", "empirical": "", "agreement": "", "decided_by": "", "wall_time": "", "error": ""}
    start = time.perf_counter()
    code = EXIT_OK
    try:
        job = _case_job(section, Path(base_dir), overrides)
        result = run_compare(job)
        v = result.verdict
        row["verdict"] = v.classification.value
        row["decided_by"] = v.decided_by or ""
        if v.applicability_error:
            row["error"] = v.reason
            code = EXIT_CONFIG
        else:
            row["empirical"] = result.empirical.kind.value
            agree = agreement(v.classification.value, result.empirical.kind.value)
            row["agreement"] = _agree_text(agree)
            if agree is False:
                code = EXIT_DISAGREE
    except ConfigError as exc:
        row["error"] = str(exc).splitlines()[0]
        code = EXIT_CONFIG
    except IntegrationError as exc:
        row["error"] = f"integration failed: {exc}"
        code = EXIT_INTEGRATOR
    except (ValueError, KeyError) as exc:
        row["error"] = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        code = EXIT_CONFIG
    row["wall_time"] = f"{time.perf_counter() - start:.3f}"
    row["_code"] = code
    return row


def read_cases(path: str) -> list[tuple[str, dict]]:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh, source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read cases file {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return [(name, dict(cp[name])) for name in cp.sections()]


def cmd_sweep(args) -> int:
    try:
        cases = read_cases(args.cases)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    overrides = {"horizon": args.horizon, "grid": args.grid, "tols": tuple(args.tol or ())}
    base = str(Path(args.cases).resolve().parent)
    items = [(cid, sec, base, overrides) for cid, sec in sorted(cases, key=lambda c: c[0])]
    if args.jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_run_case, items))
    else:
        rows = [_run_case(it) for it in items]
    buf = io.StringIO()
    w = csv.DictWriter(buf, SWEEP_HEADER, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    _write(buf.getvalue(), args.out or "-")
    codes = {r["_code"] for r in rows}
    for code in (EXIT_CONFIG, EXIT_DISAGREE, EXIT_INTEGRATOR):
        if code in codes:
            return code
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="job configuration file")
    common.add_argument("--horizon", type=float, metavar="T", help="override grid horizon T")
    common.add_argument("--grid", type=int, metavar="N", help="override number of grid samples")
    common.add_argument("--tol", action="append", metavar="KEY=VAL", help="override a tolerance (repeatable)")
    common.add_argument("--output", choices=("json", "csv"), help="output format")
    common.add_argument("--out", metavar="PATH", help="write output to PATH instead of the configured path")
    common.add_argument("--dump-traces", action="store_true", default=None, help="include sampled traces in the report")

    p = argparse.ArgumentParser(prog="ltvstab", description="Stability analysis of 2x2 linear time-varying systems.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="classify the configured system")
    sub.add_parser("simulate", parents=[common], help="integrate the fundamental matrix and write a CSV")
    cmp_ = sub.add_parser("compare", parents=[common], help="classify and check against direct integration")
    cmp_.add_argument("--report", metavar="PATH", help="re-check the agreement flag of an existing JSON report")
    sw = sub.add_parser("sweep", parents=[common], help="run compare over every case in a cases file")
    sw.add_argument("cases", help="cases file, one section per case")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")
    return p


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "compare": cmd_compare, "sweep": cmd_sweep}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
