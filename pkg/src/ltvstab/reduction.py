"""Reduction of the 2x2 system to scalar second-order equations.

For ``phi' = a phi + b psi, psi' = c phi + d psi`` this builds, symbolically,

* ``S = a + d`` and ``A = a - d``,
* ``P1 = S + b'/b``, ``P2 = S + c'/c``,
* ``D1 = (a b' - a' b)/b + a d - b c`` and ``D2 = (d c' - d' c)/c + a d - b c``,
* ``G_k = D_k + P_k'/2 - P_k^2/4`` and their first derivatives,

so that ``phi`` solves ``phi'' - P1 phi' + D1 phi = 0`` and ``psi`` solves
``psi'' - P2 psi' + D2 psi = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import ConditionOutcome, Grid, fails, holds
from .expr import Const, Expr, Neg, Pow, as_expr, differentiate, evaluate, is_constant_expr, simplify, to_string


class ApplicabilityError(ValueError):
    """The system violates a standing hypothesis of the analysis."""


@dataclass(frozen=True)
class SystemSpec:
    a: Expr
    b: Expr
    c: Expr
    d: Expr
    t0: float = 0.0

    @classmethod
    def parse(cls, a, b, c, d, t0: float = 0.0) -> "SystemSpec":
        return cls(as_expr(a), as_expr(b), as_expr(c), as_expr(d), float(t0))

    @property
    def coefficients(self) -> tuple[Expr, Expr, Expr, Expr]:
        return (self.a, self.b, self.c, self.d)

    def is_constant(self) -> bool:
        return all(is_constant_expr(e) for e in self.coefficients)

    def constant_values(self) -> tuple[complex, complex, complex, complex]:
        return tuple(complex(evaluate(e, self.t0)) for e in self.coefficients)

    def matrix(self, ts) -> np.ndarray:
        """Coefficient matrices, shape ``(len(ts), 2, 2)``."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        a, b, c, d = (evaluate(e, ts) for e in self.coefficients)
        return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)

    def __str__(self) -> str:
        return "a = {}, b = {}, c = {}, d = {}, t0 = {}".format(*map(to_string, self.coefficients), self.t0)


@dataclass(frozen=True)
class ScalarEquation:
    """``phi'' + p(t) phi' + q(t) phi = 0`` on [t0, +inf)."""

    p: Expr
    q: Expr
    t0: float = 0.0

    @classmethod
    def parse(cls, p, q, t0: float = 0.0) -> "ScalarEquation":
        return cls(as_expr(p), as_expr(q), float(t0))

    @property
    def G(self) -> Expr:
        """``q - p'/2 - p^2/4``."""
        p = self.p
        return simplify(self.q - differentiate(p) / 2 - Pow(p, 2) / 4)

    def as_system(self) -> SystemSpec:
        """Companion system ``phi' = psi, psi' = -q phi - p psi``."""
        return SystemSpec(Const(0), Const(1), simplify(Neg(self.q)), simplify(Neg(self.p)), self.t0)


@dataclass(frozen=True)
class ReducedSystem:
    system: SystemSpec
    S: Expr
    A: Expr
    D1: Expr
    D2: Expr
    P1: Expr
    P2: Expr
    G1: Expr
    G2: Expr
    G1p: Expr
    G2p: Expr

    @property
    def t0(self) -> float:
        return self.system.t0

    def G(self, k: int) -> Expr:
        return self.G1 if k == 1 else self.G2

    def Gp(self, k: int) -> Expr:
        return self.G1p if k == 1 else self.G2p

    def P(self, k: int) -> Expr:
        return self.P1 if k == 1 else self.P2

    def D(self, k: int) -> Expr:
        return self.D1 if k == 1 else self.D2


def check_nonvanishing(sys: SystemSpec, grid: Grid, tol_nonzero: float = 1e-8) -> None:
    """Raise :class:`ApplicabilityError` unless ``|b|, |c| > tol`` on the grid.

    Both the grid samples and the interval midpoints are checked.
    """
    ts = grid.ts
    probe = np.sort(np.concatenate([ts, 0.5 * (ts[1:] + ts[:-1])]))
    for name, e in (("b", sys.b), ("c", sys.c)):
        try:
            vals = np.abs(evaluate(e, probe))
        except Exception as exc:
            raise ApplicabilityError(f"coefficient {name}(t) cannot be evaluated on the grid: {exc}") from exc
        k = int(np.argmin(vals))
        if vals[k] <= tol_nonzero:
            raise ApplicabilityError(
                f"coefficient {name}(t) must be nonvanishing: |{name}({probe[k]:.6g})| = {vals[k]:.3g} "
                f"<= tol_nonzero = {tol_nonzero:g}"
            )


def reduce(sys: SystemSpec, grid: Grid | None = None, tol_nonzero: float = 1e-8) -> ReducedSystem:
    """Build the symbolic reduction products of ``sys``.

    When ``grid`` is given, ``b`` and ``c`` are first checked to be
    nonvanishing on it.
    """
    for name, e in (("b", sys.b), ("c", sys.c)):
        if isinstance(e, Const) and abs(e.value) <= tol_nonzero:
            raise ApplicabilityError(f"coefficient {name}(t) must be nonvanishing, got the constant {to_string(e)}")
    if grid is not None:
        check_nonvanishing(sys, grid, tol_nonzero)
    a, b, c, d = sys.coefficients
    ap, bp, cp, dp = (differentiate(e) for e in sys.coefficients)
    S = simplify(a + d)
    A = simplify(a - d)
    det = a * d - b * c
    D1 = simplify((a * bp - ap * b) / b + det)
    D2 = simplify((d * cp - dp * c) / c + det)
    P1 = simplify(S + bp / b)
    P2 = simplify(S + cp / c)
    G1 = simplify(D1 + differentiate(P1) / 2 - Pow(P1, 2) / 4)
    G2 = simplify(D2 + differentiate(P2) / 2 - Pow(P2, 2) / 4)
    return ReducedSystem(sys, S, A, D1, D2, P1, P2, G1, G2, differentiate(G1), differentiate(G2))


def scalar_equations(red: ReducedSystem) -> tuple[ScalarEquation, ScalarEquation]:
    """The equations satisfied by ``phi`` and by ``psi`` separately.

    They read ``phi'' - P1 phi' + D1 phi = 0``, so in the ``p, q`` form the
    damping coefficient is ``-P1``.
    """
    t0 = red.t0
    return (
        ScalarEquation(simplify(Neg(red.P1)), red.D1, t0),
        ScalarEquation(simplify(Neg(red.P2)), red.D2, t0),
    )


def check_G_realness(
    red: ReducedSystem, grid: Grid, which: Iterable[int] = (1, 2), tol_im: float = 1e-9
) -> ConditionOutcome:
    """Holds iff ``|Im G_k| <= tol_im (1 + |G_k|)`` at every grid sample."""
    ts = grid.ts
    evidence = {}
    worst = None
    for k in which:
        g = evaluate(red.G(k), ts)
        excess = np.abs(g.imag) - tol_im * (1.0 + np.abs(g))
        j = int(np.argmax(excess))
        evidence[f"max_abs_im_G{k}"] = float(np.max(np.abs(g.imag)))
        if excess[j] > 0 and worst is None:
            worst = (k, ts[j], g[j])
    if worst is not None:
        k, t, g = worst
        return fails(f"G{k} is not real: G{k}({t:.6g}) = {g:.6g}", **evidence)
    return holds(**evidence)


def transform_negate_phi(sys: SystemSpec) -> SystemSpec:
    """The system satisfied by ``(-phi, psi)``: ``b -> -b``, ``c -> -c``."""
    return SystemSpec(sys.a, simplify(Neg(sys.b)), simplify(Neg(sys.c)), sys.d, sys.t0)
