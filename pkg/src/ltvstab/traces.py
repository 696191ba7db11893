"""Sampled functionals and their finite-horizon trend tests.

Everything here maps expressions to :class:`Trace` objects on a grid, or a
trace to a three-valued :class:`ConditionOutcome`. "sup < +inf", "inf > -inf"
and "lim = +-inf" cannot be decided from samples, so they are judged from the
behaviour of the last quarter of the trace (the tail).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .core import ConditionOutcome, CriterionConfig, Grid, Trace, fails, holds, inconclusive
from .expr import Expr, compile_expr, differentiate
from .quadrature import cumulative_samples, cumulative_simpson
from .reduction import ReducedSystem, ScalarEquation

DEFAULT = CriterionConfig()


class SignPreconditionError(ValueError):
    """A functional or condition needs a sign of ``G`` that is violated."""


# ---------------------------------------------------------------------------
# helpers


def _values(e: Expr, ts: np.ndarray) -> np.ndarray:
    return np.asarray(compile_expr(e)(ts), dtype=complex)


def _real_fn(e: Expr) -> Callable[[np.ndarray], np.ndarray]:
    f = compile_expr(e)
    return lambda t: np.real(f(t))


def _require_sign(g: np.ndarray, sign: int, ts: np.ndarray, name: str, tol: float) -> np.ndarray:
    """Return Re g after checking ``sign * Re g > tol`` everywhere."""
    gr = g.real
    bad = np.nonzero(~(sign * gr > tol))[0]
    if bad.size:
        j = bad[0]
        want = "positive" if sign > 0 else "negative"
        raise SignPreconditionError(f"{name} must be {want} on the grid, but {name}({ts[j]:.6g}) = {gr[j]:.6g}")
    return gr


# ---------------------------------------------------------------------------
# stability functionals

# system kinds: index k of G_k, required sign of G_k, weight of sqrt|G_k|
# inside the integral, coefficient whose log is added, coefficient of ln|G_k|,
# optional extra term
_SYSTEM_KINDS = {
    "T31a": (1, +1, 0.0, "b", -0.5, None),
    "T31b": (2, +1, 0.0, "c", -0.5, None),
    "T32a": (1, +1, 0.0, "b", -0.5, None),
    "T32b": (2, -1, 2.0, "c", -0.5, None),
    "T33a": (1, -1, 2.0, "b", -0.5, None),
    "T33b": (2, -1, 2.0, "c", -0.5, None),
    "T34a": (1, +1, 0.0, "b", -0.5, "log1p_P"),
    "T34b": (1, +1, 0.0, "b", +0.5, None),
    "T35": (1, -1, 2.0, "b", -0.5, "log1p_P_sqrt"),
}

# scalar kinds: required sign of G, weight of sqrt|G| in the integral,
# coefficient of ln|G|, extra term
_SCALAR_KINDS = {
    "T21": (+1, 0.0, +0.5, None),
    "T22a": (+1, 0.0, +0.5, "log1p_p"),
    "T22b": (+1, 0.0, -0.5, None),
    "T23": (-1, -2.0, +0.5, None),
    "T24": (-1, -2.0, +0.5, "log1p_p_sqrt"),
}

SYSTEM_KINDS = tuple(_SYSTEM_KINDS)
SCALAR_KINDS = tuple(_SCALAR_KINDS)

# system functionals are tested with "sup < +inf" / "lim = -inf",
# scalar ones with "inf > -inf" / "lim = +inf"
UPPER, LOWER = "upper", "lower"


def functional_sense(kind: str) -> str:
    return UPPER if kind in _SYSTEM_KINDS else LOWER


def functional_trace(
    kind: str, source: Union[ReducedSystem, ScalarEquation], grid: Grid, cfg: CriterionConfig = DEFAULT
) -> Trace:
    """Sample a stability functional on ``grid``.

    The integral part is computed with adaptive Simpson quadrature, the
    logarithmic terms pointwise. Raises :class:`SignPreconditionError` when
    the sign of ``G`` that the functional presumes is violated.
    """
    ts = grid.ts
    if kind in _SYSTEM_KINDS:
        if not isinstance(source, ReducedSystem):
            raise TypeError(f"functional {kind} needs a reduced system")
        k, sign, w, coef, glog, extra = _SYSTEM_KINDS[kind]
        G, re_part, pexpr = source.G(k), source.S, source.P(k)
        coef_expr = source.system.b if coef == "b" else source.system.c
        name = f"G{k}"
    elif kind in _SCALAR_KINDS:
        if not isinstance(source, ScalarEquation):
            raise TypeError(f"functional {kind} needs a scalar equation")
        sign, w, glog, extra = _SCALAR_KINDS[kind]
        G, re_part, pexpr, coef_expr = source.G, source.p, source.p, None
        name = "G"
    else:
        raise ValueError(f"unknown functional kind {kind!r}")

    g = _require_sign(_values(G, ts), sign, ts, name, cfg.tol_sign)
    re_fn = _real_fn(re_part)
    if w:
        g_fn = _real_fn(G)
        integrand = lambda t: re_fn(t) + w * np.sqrt(np.abs(g_fn(t)))
    else:
        integrand = re_fn
    vs = cumulative_simpson(integrand, ts, tol=cfg.tol_quad).real
    vs = vs + glog * np.log(np.abs(g))
    if coef_expr is not None:
        vs = vs + np.log(np.abs(_values(coef_expr, ts)))
    if extra is not None:
        p = _values(pexpr, ts)
        root = np.sqrt(np.abs(g))
        shifted = {
            "log1p_P": p,
            "log1p_P_sqrt": p + 2.0 * root,
            "log1p_p": p,
            "log1p_p_sqrt": p - 2.0 * root,
        }[extra]
        sgn = +2.0 if kind in _SYSTEM_KINDS else -2.0
        vs = vs + sgn * np.log1p(np.abs(shifted))
    return Trace(ts, vs, kind)


# ---------------------------------------------------------------------------
# tail analysis


class LimitKind(str, enum.Enum):
    FINITE = "FiniteLimit"
    DIVERGES_PLUS = "DivergesPlus"
    DIVERGES_MINUS = "DivergesMinus"
    BOUNDED = "BoundedNoLimit"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class LimitEstimate:
    kind: LimitKind
    value: float
    slope: float
    tail_min: float
    tail_max: float
    upper_nonincreasing: bool
    lower_nondecreasing: bool

    def summary(self) -> dict:
        return {
            "limit": self.kind.value,
            "value": self.value,
            "slope": self.slope,
            "tail_min": self.tail_min,
            "tail_max": self.tail_max,
        }


def _tail(tr: Trace) -> tuple[np.ndarray, np.ndarray]:
    m = max(16, len(tr) // 4)
    return tr.ts[-m:], tr.vs[-m:]


def estimate_limit(tr: Trace, cfg: CriterionConfig = DEFAULT) -> LimitEstimate:
    """Classify the long-time behaviour of a sampled function.

    The tail (last 25% of samples) is split into halves H1, H2.

    * FiniteLimit: least-squares slope below ``tol_trend`` and tail spread
      below ``tol_trend`` per unit of tail length; the value is the last sample.
    * DivergesPlus/Minus: slope beyond ``+-tol_trend`` and the tail crosses
      ``+-divergence``.
    * BoundedNoLimit: H2 stays inside the range of H1 (a persistent
      oscillation).
    * Inconclusive otherwise, including slow drifts below the threshold.
    """
    if len(tr) < 64:
        raise ValueError("trace needs at least 64 samples")
    ts, vs = _tail(tr)
    if not np.all(np.isfinite(vs)):
        nan = float("nan")
        return LimitEstimate(LimitKind.INCONCLUSIVE, nan, nan, nan, nan, False, False)
    tol, lam = cfg.tol_trend, cfg.divergence
    slope = float(np.polyfit(ts - ts[0], vs, 1)[0])
    vmin, vmax = float(vs.min()), float(vs.max())
    spread = vmax - vmin
    length = float(ts[-1] - ts[0])
    h = vs.size // 2
    h1, h2 = vs[:h], vs[h:]
    # sampling jitter of an oscillation scales with its amplitude
    band = max(tol, 0.01 * spread)
    upper_ok = h2.max() <= h1.max() + band
    lower_ok = h2.min() >= h1.min() - band
    upper_nonincreasing = bool(upper_ok and slope <= tol)
    lower_nondecreasing = bool(lower_ok and slope >= -tol)
    if abs(slope) < tol and spread < tol * max(1.0, length):
        kind = LimitKind.FINITE
    elif slope > tol and vmax > lam:
        kind = LimitKind.DIVERGES_PLUS
    elif slope < -tol and vmin < -lam:
        kind = LimitKind.DIVERGES_MINUS
    elif upper_ok and lower_ok and abs(slope) * length <= spread + band:
        kind = LimitKind.BOUNDED
    else:
        kind = LimitKind.INCONCLUSIVE
    return LimitEstimate(kind, float(vs[-1]), slope, vmin, vmax, upper_nonincreasing, lower_nondecreasing)


def check_bounded_above(tr: Trace, cfg: CriterionConfig = DEFAULT) -> ConditionOutcome:
    """Finite-horizon proxy for ``sup tr < +inf``."""
    est = estimate_limit(tr, cfg)
    ev = est.summary()
    if est.kind is LimitKind.DIVERGES_PLUS:
        return fails("grows past the divergence threshold", tr, **ev)
    if est.kind in (LimitKind.FINITE, LimitKind.DIVERGES_MINUS, LimitKind.BOUNDED) or est.upper_nonincreasing:
        return holds("", tr, **ev)
    return inconclusive("upward drift below the divergence threshold", tr, **ev)


def _negated(tr: Trace) -> Trace:
    return Trace(tr.ts, -tr.vs, tr.label)


def check_bounded_below(tr: Trace, cfg: CriterionConfig = DEFAULT) -> ConditionOutcome:
    """Finite-horizon proxy for ``inf tr > -inf``."""
    out = check_bounded_above(_negated(tr), cfg)
    est = estimate_limit(tr, cfg)
    return ConditionOutcome(out.status, est.summary(), out.note.replace("grows", "falls").replace("upward", "downward"), tr)


def check_diverges_minus(tr: Trace, cfg: CriterionConfig = DEFAULT) -> ConditionOutcome:
    """Finite-horizon proxy for ``lim tr = -inf``."""
    est = estimate_limit(tr, cfg)
    ev = est.summary()
    if est.kind is LimitKind.DIVERGES_MINUS:
        return holds("", tr, **ev)
    if est.kind in (LimitKind.FINITE, LimitKind.DIVERGES_PLUS, LimitKind.BOUNDED) or est.lower_nondecreasing:
        return fails("does not tend to -inf", tr, **ev)
    return inconclusive("downward drift below the divergence threshold", tr, **ev)


def check_diverges_plus(tr: Trace, cfg: CriterionConfig = DEFAULT) -> ConditionOutcome:
    """Finite-horizon proxy for ``lim tr = +inf``."""
    out = check_diverges_minus(_negated(tr), cfg)
    est = estimate_limit(tr, cfg)
    return ConditionOutcome(out.status, est.summary(), out.note.replace("-inf", "+inf").replace("downward", "upward"), tr)


def integral_converges(values: np.ndarray, ts: np.ndarray, cfg: CriterionConfig = DEFAULT, label: str = "") -> ConditionOutcome:
    """Finite-horizon proxy for ``integral_{t0}^{inf} f < +inf`` (f >= 0 sampled).

    Compares the running integral at the half and the full horizon: a change
    below ``integral_rel`` holds; an increment over the second half that is
    not shrinking relative to the previous quarter fails.
    """
    I = cumulative_samples(np.asarray(values, dtype=float), ts)
    tr = Trace(ts, I, label)
    if not np.all(np.isfinite(I)):
        return fails("integrand is not finite on the grid", tr)
    n = ts.size
    i_half, i_quarter = (n - 1) // 2, (n - 1) // 4
    total, half, quarter = I[-1], I[i_half], I[i_quarter]
    inc2, inc1 = total - half, half - quarter
    ev = {"integral": float(total), "integral_half": float(half)}
    if abs(inc2) <= cfg.integral_rel * abs(total) + 1e-12:
        return holds("", tr, **ev)
    if abs(inc2) >= 0.5 * abs(inc1):
        return fails("running integral keeps growing under horizon doubling", tr, **ev)
    return inconclusive("running integral still changing", tr, **ev)


# ---------------------------------------------------------------------------
# auxiliary traces


def compute_L(Gk: Expr, grid: Grid, Gkp: Expr | None = None, cfg: CriterionConfig = DEFAULT) -> Trace:
    """``G^{-1/4}(t) * integral |(sqrt G)'| / G^{1/4}``, with ``(sqrt G)' = G'/(2 sqrt G)``."""
    ts = grid.ts
    g = _require_sign(_values(Gk, ts), +1, ts, "G", cfg.tol_sign)
    g_fn, gp_fn = _real_fn(Gk), _real_fn(Gkp if Gkp is not None else differentiate(Gk))
    integrand = lambda t: np.abs(gp_fn(t)) / (2.0 * np.abs(g_fn(t)) ** 0.75)
    inner = cumulative_simpson(integrand, ts, tol=cfg.tol_quad).real
    return Trace(ts, inner / g**0.25, "L")


def total_variation(f: Expr, grid: Grid, cfg: CriterionConfig = DEFAULT) -> Trace:
    """``Var_{t0}^t f = integral |f'|`` by quadrature of the symbolic derivative."""
    ts = grid.ts
    fp = compile_expr(differentiate(f))
    vs = cumulative_simpson(lambda t: np.abs(fp(t)), ts, tol=cfg.tol_quad).real
    return Trace(ts, vs, "Var")


def compute_R_rho(x: Expr, grid: Grid, xp: Expr | None = None, cfg: CriterionConfig = DEFAULT) -> Trace:
    """``rho_x(t) = min over grid t1 in [t0, t] of R_x(t1; t)``.

    ``R_x(t1; t) = (1 + s0 (t1 - t0)) / (1 + s0 (t - t0)) * exp(-int_{t1}^t sqrt x)
    * sup_{[t0, t1]} g + sup_{[t1, t]} g`` with ``g = |(sqrt x)'| / sqrt x =
    |x'| / (2x)`` and ``s0 = sqrt x(t0)``.
    """
    ts = grid.ts
    xv = _require_sign(_values(x, ts), +1, ts, "x", cfg.tol_sign)
    xpv = _values(xp if xp is not None else differentiate(x), ts).real
    g = np.abs(xpv) / (2.0 * xv)
    x_fn = _real_fn(x)
    C = cumulative_simpson(lambda t: np.sqrt(np.abs(x_fn(t))), ts, tol=cfg.tol_quad).real
    s0 = np.sqrt(xv[0])
    lin = 1.0 + s0 * (ts - ts[0])
    prefix_max = np.maximum.accumulate(g)
    rho = np.empty_like(ts)
    for j in range(ts.size):
        suffix_max = np.maximum.accumulate(g[j::-1])[::-1]  # max of g[i..j] for i <= j
        R = lin[: j + 1] / lin[j] * np.exp(-(C[j] - C[: j + 1])) * prefix_max[: j + 1] + suffix_max
        rho[j] = R.min()
    return Trace(ts, rho, "rho")
