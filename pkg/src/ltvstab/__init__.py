"""Stability analysis of 2x2 linear systems with time-varying coefficients.

``phi' = a(t) phi + b(t) psi``, ``psi' = c(t) phi + d(t) psi`` is reduced to a
pair of second-order scalar equations whose characteristic functions ``G1``,
``G2`` select a necessary-and-sufficient criterion. The criteria are checked
numerically on a finite horizon and cross-checked against direct integration.
"""

from .core import ConditionOutcome, CriterionConfig, Grid, Status, Trace
from .criteria import Classification, ConditionReport, Verdict, check_theorem_conditions, classify, classify_scalar
from .expr import Expr, differentiate, evaluate, parse, simplify, to_string
from .oracle import empirical_classify, integrate_fundamental, integrate_riccati, integrate_scalar, reconstruct_solution
from .reduction import ApplicabilityError, ReducedSystem, ScalarEquation, SystemSpec, reduce, scalar_equations

__version__ = "0.1.0"

__all__ = [
    "ApplicabilityError",
    "Classification",
    "ConditionOutcome",
    "ConditionReport",
    "CriterionConfig",
    "Expr",
    "Grid",
    "ReducedSystem",
    "ScalarEquation",
    "Status",
    "SystemSpec",
    "Trace",
    "Verdict",
    "check_theorem_conditions",
    "classify",
    "classify_scalar",
    "differentiate",
    "empirical_classify",
    "evaluate",
    "integrate_fundamental",
    "integrate_riccati",
    "integrate_scalar",
    "parse",
    "reconstruct_solution",
    "reduce",
    "scalar_equations",
    "simplify",
    "to_string",
]
