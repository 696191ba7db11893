"""Condition checks, stability functionals and the classification pipeline.

A theorem is represented by its labelled hypotheses and by a list of
functional lines. When all hypotheses hold, the lines decide the verdict:
every "sup < +inf" line holding means Lyapunov stable, every "lim = -inf"
line holding means asymptotically stable, and a failing sup line means not
stable (the theorems are necessary and sufficient). Scalar equations use the
mirrored "inf > -inf" / "lim = +inf" tests.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    ConditionOutcome,
    CriterionConfig,
    Grid,
    Status,
    Trace,
    all_of,
    any_of,
    fails,
    holds,
    inconclusive,
)
from .expr import Expr, Neg, Pow, compile_expr, differentiate, simplify
from .reduction import (
    ApplicabilityError,
    ReducedSystem,
    ScalarEquation,
    SystemSpec,
    check_G_realness,
    check_nonvanishing,
    reduce,
)
from .traces import (
    LOWER,
    LimitKind,
    check_bounded_above,
    check_bounded_below,
    check_diverges_minus,
    check_diverges_plus,
    compute_L,
    compute_R_rho,
    estimate_limit,
    functional_sense,
    functional_trace,
    integral_converges,
    total_variation,
)

ALPHA_BOUND = 4.0
ROUTH_HURWITZ = "RouthHurwitz"
REMARK_NOTE = "replacement conditions derived from the power-decay corollary for G < 0"


class Classification(str, enum.Enum):
    ASYMPTOTICALLY_STABLE = "AsymptoticallyStable"
    LYAPUNOV_STABLE = "LyapunovStable"
    NOT_STABLE = "NotStable"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class ConditionReport:
    theorem: str
    conditions: list[tuple[str, ConditionOutcome]]
    applicable: Status
    lyapunov: list[tuple[str, ConditionOutcome]] = field(default_factory=list)
    asymptotic: list[tuple[str, ConditionOutcome]] = field(default_factory=list)
    conclusion: Optional[Classification] = None
    note: str = ""

    @property
    def conclusive(self) -> bool:
        return self.conclusion not in (None, Classification.INCONCLUSIVE)


@dataclass
class Verdict:
    classification: Classification
    decided_by: Optional[str]
    reports: list[ConditionReport]
    sign_case: Optional[str] = None
    reason: str = ""
    applicability_error: bool = False
    horizon_classes: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# grid context


class _Ctx:
    """Grid samples of expressions, cached per structural expression."""

    def __init__(self, grid: Grid, cfg: CriterionConfig):
        self.grid, self.cfg, self.ts = grid, cfg, grid.ts
        self._cache: dict[Expr, np.ndarray] = {}

    def vals(self, e: Expr) -> np.ndarray:
        if e not in self._cache:
            self._cache[e] = np.asarray(compile_expr(e)(self.ts), dtype=complex) * np.ones(self.ts.size)
        return self._cache[e]

    def real(self, e: Expr) -> np.ndarray:
        return self.vals(e).real

    def trace(self, vs: np.ndarray, label: str) -> Trace:
        return Trace(self.ts, vs, label)


def sign_of(vals: np.ndarray, cfg: CriterionConfig) -> str:
    """'pos', 'neg', 'zero' or 'mixed' for sampled real parts."""
    v = np.real(vals)
    if np.all(np.abs(vals) <= cfg.tol_zero):
        return "zero"
    if np.all(v > cfg.tol_sign):
        return "pos"
    if np.all(v < -cfg.tol_sign):
        return "neg"
    return "mixed"


def sign_case(s1: str, s2: str) -> str:
    if s1 == s2 == "zero":
        return "trivial"
    table = {("pos", "pos"): "I", ("pos", "neg"): "II", ("neg", "neg"): "III", ("neg", "pos"): "VI"}
    if (s1, s2) in table:
        return table[(s1, s2)]
    if s1 == "pos":
        return "IV"
    if s1 == "neg":
        return "V"
    return "none"


# ---------------------------------------------------------------------------
# single conditions on a characteristic function G


def _guarded(fn: Callable[..., ConditionOutcome]) -> Callable[..., ConditionOutcome]:
    """Numerical faults inside a condition make it Inconclusive, not a crash."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs) -> ConditionOutcome:
        try:
            return fn(*args, **kwargs)
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            return inconclusive(f"evaluation failed: {exc}")

    return wrapper


def _sign_cond(ctx: _Ctx, G: Expr, sign: int, name: str) -> ConditionOutcome:
    g = ctx.real(G)
    ok = sign * g > ctx.cfg.tol_sign
    ev = {"min": float(g.min()), "max": float(g.max())}
    rel = ">" if sign > 0 else "<"
    if np.all(ok):
        return holds("", **ev)
    j = int(np.argmin(ok))
    return fails(f"{name}({ctx.ts[j]:.6g}) = {g[j]:.6g} violates {name} {rel} 0", **ev)


@_guarded
def _limit_cond(ctx: _Ctx, G: Expr, Gp: Expr, name: str) -> ConditionOutcome:
    """``lim G'/G^{3/2} = alpha`` with ``|alpha| < 4`` (needs G > 0)."""
    g = ctx.real(G)
    if not np.all(g > ctx.cfg.tol_sign):
        return fails(f"needs {name} > 0")
    r = ctx.real(Gp) / g**1.5
    tr = ctx.trace(r, f"{name}'/{name}^(3/2)")
    est = estimate_limit(tr, ctx.cfg)
    ev = est.summary()
    if est.kind is LimitKind.FINITE:
        if abs(est.value) < ALPHA_BOUND:
            return holds("", tr, alpha=est.value, **ev)
        return fails(f"limit {est.value:.6g} has modulus >= {ALPHA_BOUND:g}", tr, alpha=est.value, **ev)
    if est.kind in (LimitKind.DIVERGES_PLUS, LimitKind.DIVERGES_MINUS, LimitKind.BOUNDED):
        return fails("no finite limit", tr, **ev)
    return inconclusive("limit not resolved on the horizon", tr, **ev)


@_guarded
def _L_var_cond(ctx: _Ctx, G: Expr, Gp: Expr, name: str) -> ConditionOutcome:
    g = ctx.real(G)
    if not np.all(g > ctx.cfg.tol_sign):
        return fails(f"needs {name} > 0")
    L = compute_L(G, ctx.grid, Gp, ctx.cfg)
    var = total_variation(simplify(Gp * Pow(G, -1.5)), ctx.grid, ctx.cfg)
    return all_of([("L", check_bounded_above(L, ctx.cfg)), ("Var", check_bounded_above(var, ctx.cfg))])


def _nonincreasing_cond(ctx: _Ctx, G: Expr, name: str) -> ConditionOutcome:
    g = ctx.real(G)
    rise = np.diff(g)
    tol = ctx.cfg.tol_mono * (1.0 + np.abs(g).max())
    j = int(np.argmax(rise))
    ev = {"max_increase": float(rise[j])}
    if rise[j] <= tol:
        return holds("", **ev)
    return fails(f"{name} increases by {rise[j]:.3g} after t = {ctx.ts[j]:.6g}", **ev)


@_guarded
def _ratio_eps_cond(ctx: _Ctx, G: Expr, Gp: Expr, name: str) -> ConditionOutcome:
    """``G'/|G|^{3/2 - eps}`` bounded for some eps from the search list."""
    ag, gp = np.abs(ctx.real(G)), np.abs(ctx.real(Gp))
    seen = []
    for eps in ctx.cfg.eps_exponents:
        tr = ctx.trace(gp / ag ** (1.5 - eps), f"|{name}'|/|{name}|^(3/2-{eps:g})")
        out = check_bounded_above(tr, ctx.cfg)
        if out.holds:
            return holds("", tr, eps=eps)
        seen.append(out.status)
    if Status.INCONCLUSIVE in seen:
        return inconclusive("no exponent gave a bounded ratio on the horizon")
    return fails("ratio unbounded for every searched exponent")


@_guarded
def _floor_cond(ctx: _Ctx, G: Expr, name: str) -> ConditionOutcome:
    """``|G| >= eps > 0``: ln|G| bounded below; eps reported as half the grid minimum."""
    ag = np.abs(ctx.real(G))
    eps = 0.5 * float(ag.min())
    out = check_bounded_below(ctx.trace(np.log(ag), f"ln|{name}|"), ctx.cfg)
    return ConditionOutcome(out.status, {"eps": eps, **out.evidence}, out.note, out.trace)


@_guarded
def _log_ratio_cond(ctx: _Ctx, G: Expr, Gp: Expr, name: str) -> ConditionOutcome:
    r = np.abs(ctx.real(Gp) / ctx.real(G))
    return check_bounded_above(ctx.trace(r, f"|{name}'/{name}|"), ctx.cfg)


def _abs_expr(G: Expr, g: np.ndarray) -> Expr:
    return G if np.all(g > 0) else simplify(Neg(G))


@_guarded
def _rho_integral_cond(ctx: _Ctx, G: Expr, Gp: Expr, name: str) -> ConditionOutcome:
    g = ctx.real(G)
    x = _abs_expr(G, g)
    xp = Gp if x is G else simplify(Neg(Gp))
    rho = compute_R_rho(x, ctx.grid, xp, ctx.cfg)
    integrand = rho.vs * np.abs(ctx.real(Gp)) / np.abs(g) ** 1.5
    return integral_converges(integrand, ctx.ts, ctx.cfg, f"int rho |{name}'|/|{name}|^(3/2)")


def _envelope_cond(ctx: _Ctx, G: Expr, Gp: Expr, name: str) -> tuple[ConditionOutcome, float]:
    """``|G'|/|G| <= M (1 + t - t0)^-alpha`` with alpha > 0 fitted by least squares."""
    r = np.abs(ctx.real(Gp) / ctx.real(G))
    s = 1.0 + ctx.ts - ctx.ts[0]
    scale = max(1.0, float(r.max()))
    if np.all(r <= 1e-12 * scale):
        return holds(f"{name}' vanishes, alpha taken as 1", alpha=1.0, M=0.0), 1.0
    mask = r > 1e-300
    alpha = -float(np.polyfit(np.log(s[mask]), np.log(r[mask]), 1)[0])
    if alpha < ctx.cfg.alpha_min:
        return fails(f"fitted decay exponent {alpha:.4g} is not positive", alpha=alpha), alpha
    env = ctx.trace(r * s**alpha, f"|{name}'/{name}| (1+t-t0)^alpha")
    out = check_bounded_above(env, ctx.cfg)
    ev = {"alpha": alpha, "M": float(env.vs.max())}
    return ConditionOutcome(out.status, ev, out.note, env), alpha


@_guarded
def _remark_cond(ctx: _Ctx, G: Expr, Gp: Expr, name: str) -> ConditionOutcome:
    parts = [("floor", _floor_cond(ctx, G, name))]
    env, alpha = _envelope_cond(ctx, G, Gp, name)
    parts.append(("envelope", env))
    if env.status is not Status.FAILS:
        s = 1.0 + ctx.ts - ctx.ts[0]
        integrand = 1.0 / (np.sqrt(np.abs(ctx.real(G))) * s ** (2.0 * alpha))
        parts.append(("integral", integral_converges(integrand, ctx.ts, ctx.cfg, "int dt/(sqrt|G| (1+t-t0)^(2 alpha))")))
    return all_of(parts, REMARK_NOTE)


# ---------------------------------------------------------------------------
# condition groups of the theorems


def _positive_groups(ctx, G, Gp, name):
    """Hypotheses for G > 0: sign and limit, then L and Var."""
    first = all_of([("sign", _sign_cond(ctx, G, +1, name)), ("limit", _limit_cond(ctx, G, Gp, name))])
    return first, _L_var_cond(ctx, G, Gp, name)


def _negative_groups(ctx, G, Gp, name):
    """Hypotheses for G < 0 as (sign, monotone group, floor group, remark group)."""
    sign = _sign_cond(ctx, G, -1, name)
    mono = all_of([("nonincreasing", _nonincreasing_cond(ctx, G, name)), ("ratio", _ratio_eps_cond(ctx, G, Gp, name))])
    floor = all_of(
        [
            ("floor", _floor_cond(ctx, G, name)),
            ("log_ratio", _log_ratio_cond(ctx, G, Gp, name)),
            ("rho_integral", _rho_integral_cond(ctx, G, Gp, name)),
        ]
    )
    remark = _remark_cond(ctx, G, Gp, name)
    return sign, mono, floor, remark


@_guarded
def _bounded_coefficients(ctx: _Ctx, sys: SystemSpec) -> ConditionOutcome:
    a, b = ctx.vals(sys.a), ctx.vals(sys.b)
    parts = [
        ("a", check_bounded_above(ctx.trace(np.abs(a), "|a|"), ctx.cfg)),
        ("b", check_bounded_above(ctx.trace(np.abs(b), "|b|"), ctx.cfg)),
        ("1/b", check_bounded_above(ctx.trace(1.0 / np.abs(b), "|1/b|"), ctx.cfg)),
    ]
    ev = {"max_abs_a": float(np.abs(a).max()), "max_abs_b": float(np.abs(b).max()), "max_abs_inv_b": float((1 / np.abs(b)).max())}
    out = all_of(parts)
    out.evidence.update(ev)
    return out


def _alternatives(options: list[ConditionOutcome]) -> Status:
    return any_of(o.status for o in options)


THEOREMS = ("3.1", "3.2", "3.3", "3.4", "3.5")
SCALAR_THEOREMS = ("2.1", "2.2", "2.3", "2.4", "C2.1")

# functional lines: (Lyapunov kinds, asymptotic kinds) per theorem
_LINES = {
    "3.1": ["T31a", "T31b"],
    "3.2": ["T32a", "T32b"],
    "3.3": ["T33a", "T33b"],
    "3.4": ["T34a", "T34b"],
    "3.5": ["T35"],
    "2.1": ["T21"],
    "2.2": ["T22a", "T22b"],
    "2.3": ["T23"],
    "2.4": ["T24"],
    "C2.1": ["T24"],
}


def check_theorem_conditions(
    theorem: str, red: ReducedSystem, sys: SystemSpec, grid: Grid, cfg: CriterionConfig = CriterionConfig()
) -> ConditionReport:
    """Evaluate every labelled hypothesis of a system theorem on ``grid``."""
    ctx = _Ctx(grid, cfg)
    realness = check_G_realness(red, grid, tol_im=cfg.tol_im)
    if not realness.holds:
        return ConditionReport(theorem, [("G real", realness)], Status.FAILS, note=realness.note)
    G1, G2, G1p, G2p = red.G1, red.G2, red.G1p, red.G2p
    conds: list[tuple[str, ConditionOutcome]] = []
    note = ""
    if theorem == "3.1":
        p1 = _positive_groups(ctx, G1, G1p, "G1")
        p2 = _positive_groups(ctx, G2, G2p, "G2")
        conds = [("1)", all_of([("k=1", p1[0]), ("k=2", p2[0])])), ("2)", all_of([("k=1", p1[1]), ("k=2", p2[1])]))]
        applicable = all_of(conds).status
    elif theorem == "3.2":
        p1 = _positive_groups(ctx, G1, G1p, "G1")
        sign, mono, floor, remark = _negative_groups(ctx, G2, G2p, "G2")
        c5 = all_of([("sign", sign), ("monotone", mono)])
        c51 = all_of([("sign", sign), ("floor", floor)])
        c_r = all_of([("sign", sign), ("remark", remark)])
        conds = [("3)", p1[0]), ("4)", p1[1]), ("5)", c5), ("5_1)", c51), ("R3.2", c_r)]
        applicable = all_of([("3)", p1[0]), ("4)", p1[1])]).status
        applicable = _and(applicable, _alternatives([c5, c51, c_r]))
        note = "5) / 5_1) / R3.2 are alternatives"
    elif theorem == "3.3":
        n1 = _negative_groups(ctx, G1, G1p, "G1")
        n2 = _negative_groups(ctx, G2, G2p, "G2")
        c6 = all_of(
            [
                ("G1<0", n1[0]),
                ("G2<0", n2[0]),
                ("G1 nonincreasing", _nonincreasing_cond(ctx, G1, "G1")),
                ("G2 nonincreasing", _nonincreasing_cond(ctx, G2, "G2")),
            ]
        )
        c7 = all_of([("k=1", _ratio_eps_cond(ctx, G1, G1p, "G1")), ("k=2", _ratio_eps_cond(ctx, G2, G2p, "G2"))])
        c71 = all_of([("k=1", n1[2]), ("k=2", n2[2])])
        c_r = all_of([("k=1", n1[3]), ("k=2", n2[3])])
        conds = [("6)", c6), ("7)", c7), ("7_1)", c71), ("R3.2", c_r)]
        applicable = _and(c6.status, _alternatives([c7, c71, c_r]))
        note = "7) / 7_1) / R3.2 are alternatives"
    elif theorem == "3.4":
        p1 = _positive_groups(ctx, G1, G1p, "G1")
        conds = [("8)", _bounded_coefficients(ctx, sys)), ("9)", p1[0]), ("10)", p1[1])]
        applicable = all_of(conds).status
    elif theorem == "3.5":
        sign, mono, floor, remark = _negative_groups(ctx, G1, G1p, "G1")
        c8 = _bounded_coefficients(ctx, sys)
        conds = [("8)", c8), ("11)", sign), ("12)", mono), ("12_1)", floor), ("R3.2", remark)]
        applicable = _and(_and(c8.status, sign.status), _alternatives([mono, floor, remark]))
        note = "12) / 12_1) / R3.2 are alternatives"
    else:
        raise ValueError(f"unknown theorem {theorem!r}")
    return ConditionReport(theorem, conds, applicable, note=note)


def check_scalar_conditions(theorem: str, eq: ScalarEquation, grid: Grid, cfg: CriterionConfig = CriterionConfig()) -> ConditionReport:
    """Evaluate the hypotheses of a scalar-equation theorem on ``grid``."""
    ctx = _Ctx(grid, cfg)
    G = eq.G
    Gp = differentiate(G)
    g = ctx.vals(G)
    if np.any(np.abs(g.imag) > cfg.tol_im * (1 + np.abs(g))):
        bad = fails("G is not real on the grid")
        return ConditionReport(theorem, [("G real", bad)], Status.FAILS, note=bad.note)
    note = ""
    if theorem in ("2.1", "2.2"):
        first, second = _positive_groups(ctx, G, Gp, "G")
        conds = [("G>0, lim", first), ("L0, Var", second)]
        applicable = all_of(conds).status
    else:
        sign, mono, floor, remark = _negative_groups(ctx, G, Gp, "G")
        if theorem == "2.3":
            conds = [("A)", sign), ("B)", mono), ("C)", floor)]
            applicable = _and(sign.status, _alternatives([mono, floor]))
            note = "B) / C) are alternatives"
        elif theorem == "2.4":
            d = all_of([("nonincreasing", _nonincreasing_cond(ctx, G, "G")), ("log_ratio", _log_ratio_cond(ctx, G, Gp, "G"))])
            conds = [("A)", sign), ("C)", floor), ("D)", d)]
            applicable = _and(sign.status, _alternatives([floor, d]))
            note = "C) / D) are alternatives"
        elif theorem == "C2.1":
            conds = [("A)", sign), ("decay", remark)]
            applicable = all_of(conds).status
        else:
            raise ValueError(f"unknown theorem {theorem!r}")
    return ConditionReport(theorem, conds, applicable, note=note)


def _and(*statuses: Status) -> Status:
    if Status.FAILS in statuses:
        return Status.FAILS
    if all(s is Status.HOLDS for s in statuses):
        return Status.HOLDS
    return Status.INCONCLUSIVE


# ---------------------------------------------------------------------------
# functionals and conclusions


def evaluate_functionals(report: ConditionReport, source, grid: Grid, cfg: CriterionConfig) -> ConditionReport:
    """Fill the functional lines of an applicable report and draw its conclusion."""
    if report.applicable is not Status.HOLDS:
        report.conclusion = Classification.INCONCLUSIVE
        return report
    for kind in _LINES[report.theorem]:
        try:
            tr = functional_trace(kind, source, grid, cfg)
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            bad = inconclusive(f"functional {kind} could not be evaluated: {exc}")
            report.lyapunov.append((kind, bad))
            report.asymptotic.append((kind, bad))
            continue
        if functional_sense(kind) == LOWER:
            report.lyapunov.append((kind, check_bounded_below(tr, cfg)))
            report.asymptotic.append((kind, check_diverges_plus(tr, cfg)))
        else:
            report.lyapunov.append((kind, check_bounded_above(tr, cfg)))
            report.asymptotic.append((kind, check_diverges_minus(tr, cfg)))
    report.conclusion = conclude(report)
    return report


def conclude(report: ConditionReport) -> Classification:
    lyap = [o.status for _, o in report.lyapunov]
    asym = [o.status for _, o in report.asymptotic]
    if asym and all(s is Status.HOLDS for s in asym):
        return Classification.ASYMPTOTICALLY_STABLE
    if lyap and all(s is Status.HOLDS for s in lyap):
        return Classification.LYAPUNOV_STABLE
    if Status.FAILS in lyap:
        return Classification.NOT_STABLE
    return Classification.INCONCLUSIVE


def routh_hurwitz(sys: SystemSpec, cfg: CriterionConfig) -> Optional[ConditionReport]:
    """Constant real coefficients: negative trace and positive determinant.

    Returns ``None`` for complex constants. Boundary cases (trace or
    determinant within ``tol_rh`` of zero) get an Inconclusive report.
    """
    a, b, c, d = sys.constant_values()
    if any(abs(z.imag) > cfg.tol_im for z in (a, b, c, d)):
        return None
    a, b, c, d = (z.real for z in (a, b, c, d))
    tr, det = a + d, a * d - b * c
    ev = {"trace": tr, "det": det}
    trace_neg = holds(**ev) if tr < -cfg.tol_rh else (fails(**ev) if tr > cfg.tol_rh else inconclusive("trace is zero", **ev))
    det_pos = holds(**ev) if det > cfg.tol_rh else (fails(**ev) if det < -cfg.tol_rh else inconclusive("determinant is zero", **ev))
    conds = [("a0+d0<0", trace_neg), ("a0*d0-b0*c0>0", det_pos)]
    report = ConditionReport(ROUTH_HURWITZ, conds, Status.HOLDS)
    if trace_neg.holds and det_pos.holds:
        report.conclusion = Classification.ASYMPTOTICALLY_STABLE
    elif Status.FAILS in (trace_neg.status, det_pos.status):
        report.conclusion = Classification.NOT_STABLE
    else:
        report.conclusion = Classification.INCONCLUSIVE
        report.note = "boundary case, deferred to the general criteria"
    return report


# ---------------------------------------------------------------------------
# classification


def _classify_general(sys: SystemSpec, red: ReducedSystem, grid: Grid, cfg: CriterionConfig) -> Verdict:
    ctx = _Ctx(grid, cfg)
    realness = check_G_realness(red, grid, tol_im=cfg.tol_im)
    if not realness.holds:
        rep = ConditionReport("G real", [("G real", realness)], Status.FAILS, note=realness.note)
        return Verdict(Classification.INCONCLUSIVE, None, [rep], None, "G1 or G2 is not real on the grid")
    s1, s2 = sign_of(ctx.vals(red.G1), cfg), sign_of(ctx.vals(red.G2), cfg)
    case = sign_case(s1, s2)
    reports: list[ConditionReport] = []
    if case == "trivial":
        return Verdict(Classification.INCONCLUSIVE, None, [], case, "G1 = G2 = 0 identically; this trivial case is not covered")
    candidates = []
    if case in ("I", "II", "III"):
        candidates.append({"I": "3.1", "II": "3.2", "III": "3.3"}[case])
    reason = ""
    if case == "VI":
        reason = (
            "sign case VI (G1 < 0 < G2) has no direct criterion; the reduction under phi -> -phi "
            "(transform_negate_phi) leaves G1, G2 unchanged"
        )
    if s1 == "pos":
        candidates.append("3.4")
    elif s1 == "neg":
        candidates.append("3.5")
    for th in candidates:
        rep = check_theorem_conditions(th, red, sys, grid, cfg)
        evaluate_functionals(rep, red, grid, cfg)
        reports.append(rep)
        if rep.conclusive:
            return Verdict(rep.conclusion, th, reports, case, reason)
    if not candidates:
        reason = reason or f"no criterion applies to sign pattern ({s1}, {s2}) of (G1, G2)"
    return Verdict(Classification.INCONCLUSIVE, None, reports, case, reason or "no applicable criterion was conclusive")


def _over_horizons(run: Callable[[Grid], Verdict], grid: Grid) -> Verdict:
    """Run on each horizon; a class change between horizons gives Inconclusive."""
    verdicts = [run(g) for g in grid.horizons()]
    classes = [v.classification.value for v in verdicts]
    final = verdicts[-1]
    final.horizon_classes = classes
    if len(set(classes)) > 1:
        horizons = ", ".join(f"T={g.T:g}: {c}" for g, c in zip(grid.horizons(), classes))
        return Verdict(
            Classification.INCONCLUSIVE,
            None,
            final.reports,
            final.sign_case,
            f"verdict changes under horizon doubling ({horizons})",
            horizon_classes=classes,
        )
    return final


def classify(sys: SystemSpec, grid: Grid, cfg: CriterionConfig = CriterionConfig()) -> Verdict:
    """Stability verdict for the system, never raising on bad input data."""
    longest = grid.horizons()[-1]
    try:
        check_nonvanishing(sys, longest, cfg.tol_nonzero)
        red = reduce(sys, tol_nonzero=cfg.tol_nonzero)
    except ApplicabilityError as exc:
        return Verdict(Classification.INCONCLUSIVE, None, [], None, str(exc), applicability_error=True)
    reports: list[ConditionReport] = []
    if sys.is_constant() and cfg.use_routh_hurwitz:
        rh = routh_hurwitz(sys, cfg)
        if rh is not None:
            if rh.conclusive:
                return Verdict(rh.conclusion, ROUTH_HURWITZ, [rh], None, "")
            reports.append(rh)

    def run(g: Grid) -> Verdict:
        try:
            return _classify_general(sys, red, g, cfg)
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            return Verdict(Classification.INCONCLUSIVE, None, [], None, f"evaluation failed: {exc}")

    verdict = _over_horizons(run, grid)
    verdict.reports = reports + verdict.reports
    return verdict


def classify_scalar(eq: ScalarEquation, grid: Grid, cfg: CriterionConfig = CriterionConfig()) -> Verdict:
    """Stability verdict for ``phi'' + p phi' + q phi = 0``.

    G > 0 uses the two-line criterion with the ``-2 ln(1+|p|)`` term; G < 0
    uses the single-line criterion with hypotheses C) or D), then the
    power-decay corollary. Solution-boundedness reports are kept as evidence.
    """

    def run(g: Grid) -> Verdict:
        ctx = _Ctx(g, cfg)
        try:
            s = sign_of(ctx.vals(eq.G), cfg)
        except (ArithmeticError, ValueError) as exc:
            return Verdict(Classification.INCONCLUSIVE, None, [], None, f"evaluation failed: {exc}")
        if s == "pos":
            order, deciders = ("2.1", "2.2"), ("2.2",)
        elif s == "neg":
            order, deciders = ("2.3", "2.4", "C2.1"), ("2.4", "C2.1")
        else:
            return Verdict(Classification.INCONCLUSIVE, None, [], None, f"G is not of constant sign on the grid ({s})")
        reports = []
        for th in order:
            try:
                rep = check_scalar_conditions(th, eq, g, cfg)
                evaluate_functionals(rep, eq, g, cfg)
            except (ArithmeticError, ValueError, RuntimeError) as exc:
                rep = ConditionReport(th, [], Status.INCONCLUSIVE, note=f"evaluation failed: {exc}")
                rep.conclusion = Classification.INCONCLUSIVE
            reports.append(rep)
        for rep in reports:
            if rep.theorem in deciders and rep.conclusive:
                return Verdict(rep.conclusion, rep.theorem, reports, None, "")
        return Verdict(Classification.INCONCLUSIVE, None, reports, None, "no applicable criterion was conclusive")

    return _over_horizons(run, grid)
