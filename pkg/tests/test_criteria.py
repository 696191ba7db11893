import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_smooth_coefficient
from ltvstab.core import CriterionConfig, Grid, Status
from ltvstab.criteria import (
    ROUTH_HURWITZ,
    Classification,
    check_theorem_conditions,
    classify,
    classify_scalar,
    routh_hurwitz,
    sign_case,
    sign_of,
)
from ltvstab.expr import Const, Mul, evaluate
from ltvstab.reduction import ScalarEquation, SystemSpec, reduce
from ltvstab.traces import functional_trace

GRID = Grid(0, 50, 512, doublings=1)
CFG = CriterionConfig()

AS, LS, NS, INC = (
    Classification.ASYMPTOTICALLY_STABLE,
    Classification.LYAPUNOV_STABLE,
    Classification.NOT_STABLE,
    Classification.INCONCLUSIVE,
)


def conditions(report):
    return dict(report.conditions)


# -- sign cases --------------------------------------------------------------


def test_sign_of_grid_samples():
    assert sign_of(np.array([1.0, 2.0]), CFG) == "pos"
    assert sign_of(np.array([-1.0, -2.0]), CFG) == "neg"
    assert sign_of(np.zeros(4), CFG) == "zero"
    assert sign_of(np.array([-1.0, 1.0]), CFG) not in ("pos", "neg")


@pytest.mark.parametrize(
    "s1,s2,case",
    [("pos", "pos", "I"), ("pos", "neg", "II"), ("neg", "neg", "III"), ("neg", "pos", "VI"), ("zero", "zero", "trivial")],
)
def test_sign_case_table(s1, s2, case):
    assert sign_case(s1, s2) == case


def test_only_G1_signed_cases():
    assert sign_case("pos", "mixed") == "IV"
    assert sign_case("neg", "mixed") == "V"


# -- constant systems --------------------------------------------------------


def test_constant_stable_system_uses_routh_hurwitz():
    v = classify(SystemSpec.parse("-1", "1", "-1", "-1"), GRID)
    assert v.classification is AS and v.decided_by == ROUTH_HURWITZ


def test_zero_trace_defers_to_general_criteria():
    sys = SystemSpec.parse("0", "1", "-1", "0")
    rh = routh_hurwitz(sys, CFG)
    assert rh.conclusion is INC
    v = classify(sys, GRID)
    assert v.classification is LS and v.decided_by == "3.1"
    assert v.reports[0].theorem == ROUTH_HURWITZ


def test_growing_constant_system_is_not_stable():
    assert classify(SystemSpec.parse("1", "1", "1", "1"), GRID).classification is NS
    v = classify(SystemSpec.parse("1", "1", "1", "1"), GRID, CriterionConfig(use_routh_hurwitz=False))
    assert v.classification is NS
    assert v.sign_case == "III"


def test_complex_constants_skip_routh_hurwitz():
    assert routh_hurwitz(SystemSpec.parse("i", "1", "-1", "-1"), CFG) is None


# -- condition reports -------------------------------------------------------


def test_rotation_meets_every_condition_of_3_1():
    sys = SystemSpec.parse("0", "1", "-1", "0")
    rep = check_theorem_conditions("3.1", reduce(sys), sys, GRID, CFG)
    assert [label for label, _ in rep.conditions] == ["1)", "2)"]
    assert all(o.holds for _, o in rep.conditions)
    assert rep.applicable is Status.HOLDS


def test_negative_constant_G_meets_3_3():
    sys = SystemSpec.parse("1", "1", "1", "1")
    rep = check_theorem_conditions("3.3", reduce(sys), sys, GRID, CFG)
    conds = conditions(rep)
    assert set(conds) == {"6)", "7)", "7_1)", "R3.2"}
    assert conds["6)"].holds and conds["7_1)"].holds
    assert rep.applicable is Status.HOLDS


def test_bounded_coefficients_condition():
    sys = SystemSpec.parse("-1", "2 + sin(t)", "1", "-1")
    rep = check_theorem_conditions("3.5", reduce(sys), sys, GRID, CFG)
    assert conditions(rep)["8)"].holds


def test_growing_b_breaks_bounded_coefficients():
    sys = SystemSpec.parse("-1", "1 + t", "-1", "-1")
    rep = check_theorem_conditions("3.4", reduce(sys), sys, GRID, CFG)
    assert conditions(rep)["8)"].status is Status.FAILS


def test_unknown_theorem():
    sys = SystemSpec.parse("0", "1", "-1", "0")
    with pytest.raises(ValueError):
        check_theorem_conditions("9.9", reduce(sys), sys, GRID, CFG)


# -- verdicts ---------------------------------------------------------------


def test_vanishing_b_is_an_inconclusive_verdict():
    v = classify(SystemSpec.parse("0", "sin(t)", "-1", "0"), GRID)
    assert v.classification is INC and v.applicability_error
    assert "b" in v.reason


def test_evaluation_failure_is_contained():
    # G1 = 1 + sin t touches zero, which breaks the L_k quadrature
    v = classify(SystemSpec.parse("0", "1", "-(2 + sin(t))", "-2"), GRID)
    assert v.classification is INC
    assert v.sign_case in ("IV", "II")


def test_sign_case_VI_points_to_the_negation():
    # mirror of the case II exemplar: G2 = (1+t)^-3.5 > 0 and G1 < 0
    v = classify(SystemSpec.parse("-0.5", "-(1 + t)^(-3.5)", "1", "-0.5"), Grid(0, 20, 256))
    assert v.sign_case == "VI" and v.classification is INC
    assert "transform_negate_phi" in v.reason


def test_trivial_case_is_inconclusive():
    # G1 = G2 = 1e-7 sits below the zero tolerance, so both count as zero
    v = classify(SystemSpec.parse("0", "1", "-1e-7", "0"), GRID, CriterionConfig(use_routh_hurwitz=False, tol_zero=1e-6))
    assert v.sign_case == "trivial" and v.classification is INC


@pytest.mark.parametrize(
    "p,q,expected",
    [("0", "1", LS), ("2", "2", AS), ("0", "-1", NS)],
)
def test_scalar_examples(p, q, expected):
    assert classify_scalar(ScalarEquation.parse(p, q), GRID).classification is expected


def test_scalar_mixed_sign_G_is_inconclusive():
    v = classify_scalar(ScalarEquation.parse("0", "sin(t)"), GRID)
    assert v.classification is INC and "constant sign" in v.reason


def test_verdicts_are_deterministic():
    sys = SystemSpec.parse("0", "1", "-(1 + exp(-t))", "0")
    v1, v2 = classify(sys, GRID), classify(sys, GRID)
    assert v1 == v2


# -- properties ---------------------------------------------------------------


@settings(max_examples=10, deadline=None)
@given(lam=st.sampled_from([-3.0, -0.5, 0.25, 2.0, 7.0]))
def test_joint_rescaling_of_b_and_c_keeps_the_verdict(lam):
    a, b, c, d = "0", "2 + sin(t)", "-(1 + exp(-t))/(2 + sin(t))", "0"
    base = SystemSpec.parse(a, b, c, d)
    scaled = SystemSpec(base.a, Mul(Const(lam), base.b), Mul(Const(1 / lam), base.c), base.d)
    grid = Grid(0, 40, 256)
    r0, r1 = reduce(base), reduce(scaled)
    for e, f in ((r0.D1, r1.D1), (r0.G1, r1.G1)):
        np.testing.assert_allclose(evaluate(f, grid.ts), evaluate(e, grid.ts), rtol=1e-10, atol=1e-10)
    t0 = functional_trace("T31a", r0, grid)
    t1 = functional_trace("T31a", r1, grid)
    np.testing.assert_allclose(t1.vs - t0.vs, np.log(abs(lam)), atol=1e-9)
    assert classify(scaled, grid).classification is classify(base, grid).classification


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_sign_conditions_never_hold_on_violated_samples(seed):
    rng = np.random.default_rng(seed)
    sys = SystemSpec(
        random_smooth_coefficient(rng),
        random_smooth_coefficient(rng, True),
        random_smooth_coefficient(rng, True),
        random_smooth_coefficient(rng),
    )
    grid = Grid(0, 20, 128)
    red = reduce(sys)
    g1 = np.real(evaluate(red.G1, grid.ts))
    g2 = np.real(evaluate(red.G2, grid.ts))
    for theorem in ("3.1", "3.3"):
        rep = check_theorem_conditions(theorem, red, sys, grid, CFG)
        sign_label = "1)" if theorem == "3.1" else "6)"
        if theorem == "3.1":
            violated = np.any(g1 <= 0) or np.any(g2 <= 0)
        else:
            violated = np.any(g1 >= 0) or np.any(g2 >= 0)
        if violated:
            assert not conditions(rep)[sign_label].holds
            assert rep.applicable is not Status.HOLDS


def random_constant_system(rng):
    while True:
        a, b, c, d = rng.uniform(-3, 3, 4)
        if abs(a + d) > 0.1 and abs(a * d - b * c) > 0.1 and abs(b) > 0.05 and abs(c) > 0.05:
            return a, b, c, d


def test_routh_hurwitz_matches_eigenvalues():
    rng = np.random.default_rng(20240611)
    grid = Grid(0, 20, 128)
    inconclusive = 0
    for _ in range(200):
        a, b, c, d = random_constant_system(rng)
        v = classify(SystemSpec.parse(Const(a), Const(b), Const(c), Const(d)), grid)
        stable = np.max(np.linalg.eigvals([[a, b], [c, d]]).real) < 0
        if v.classification is INC:
            inconclusive += 1
            continue
        assert (v.classification is AS) == stable
    assert inconclusive < 20
