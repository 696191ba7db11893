"""Shared generators for the test suite."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ltvstab.expr import Add, Const, Cos, Div, Exp, Expr, Ln, Mul, Neg, Pow, Sin, Sqrt, Sub, T, evaluate

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"
EXAMPLE_CONFIGS = sorted(CONFIGS.glob("*.ini"))


def random_expr(rng: np.random.Generator, depth: int = 6) -> Expr:
    """Random expression over the full node set, constants in [-3, 3]."""
    if depth <= 0 or rng.random() < 0.2:
        return T if rng.random() < 0.6 else Const(round(float(rng.uniform(-3, 3)), 3))
    kind = rng.integers(0, 11)
    sub = lambda: random_expr(rng, depth - 1)
    if kind == 0:
        return Add(sub(), sub())
    if kind == 1:
        return Sub(sub(), sub())
    if kind == 2:
        return Mul(sub(), sub())
    if kind == 3:
        return Div(sub(), sub())
    if kind == 4:
        return Neg(sub())
    if kind == 5:
        return Pow(sub(), int(rng.integers(2, 4)))
    if kind == 6:
        return Exp(Mul(Const(0.3), sub()))
    if kind == 7:
        return Ln(Add(Const(1.5), Pow(sub(), 2)))
    if kind == 8:
        return Sin(sub())
    if kind == 9:
        return Cos(sub())
    return Sqrt(Add(Const(0.5), Pow(sub(), 2)))


def central_difference(e: Expr, t: float, h: float = 1e-5) -> complex:
    return (evaluate(e, t + h) - evaluate(e, t - h)) / (2 * h)


def regular_point(e: Expr, t: float, h: float = 1e-5, limit: float = 1e6) -> bool:
    """True when ``e`` is finite, moderate and smooth on ``[t - 4h, t + 4h]``.

    Smoothness is judged by agreement of central differences with steps
    ``h`` and ``4h``, which fails near poles and steep layers.
    """
    try:
        vals = np.asarray(evaluate(e, t + h * np.arange(-4, 5)), dtype=complex)
    except Exception:
        return False
    if not np.all(np.isfinite(vals)) or np.max(np.abs(vals)) > limit:
        return False
    d1 = (vals[5] - vals[3]) / (2 * h)
    d4 = (vals[8] - vals[0]) / (8 * h)
    return abs(d1 - d4) <= 1e-6 * (1 + abs(d1))


def random_smooth_coefficient(rng: np.random.Generator, nonvanishing: bool = False) -> Expr:
    """Degree <= 3 polynomial in sin t, cos t and a bounded ramp, values in [-2, 2].

    With ``nonvanishing`` the result is shifted to stay in [0.5, 2] or [-2, -0.5].
    """
    basis = [Sin(T), Cos(T), Div(T, Add(Const(1), T))]
    terms: Expr = Const(0)
    total = 0.0
    for _ in range(int(rng.integers(1, 4))):
        deg = int(rng.integers(1, 4))
        mono: Expr = Const(1)
        for _ in range(deg):
            mono = Mul(mono, basis[int(rng.integers(0, 3))])
        c = float(rng.uniform(-1, 1))
        total += abs(c)
        terms = Add(terms, Mul(Const(c), mono))
    if not nonvanishing:
        return Mul(Const(1.5 / max(total, 1.0)), terms)
    scale = 0.7 / max(total, 1.0)  # |scaled terms| <= 0.7
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return Mul(Const(sign), Add(Const(1.25), Mul(Const(scale), terms)))
