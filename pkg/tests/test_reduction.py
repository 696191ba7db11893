import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_smooth_coefficient
from ltvstab.core import Grid
from ltvstab.expr import Const, Mul, evaluate, parse
from ltvstab.oracle import integrate_fundamental
from ltvstab.reduction import (
    ApplicabilityError,
    ScalarEquation,
    SystemSpec,
    check_G_realness,
    check_nonvanishing,
    reduce,
    scalar_equations,
    transform_negate_phi,
)

GRID = Grid(0, 10, 128)
TS = GRID.ts


def values(e, ts=TS):
    return np.asarray(evaluate(e, ts), dtype=complex) * np.ones(np.size(ts))


def test_rotation_reduces_to_unit_quantities():
    red = reduce(SystemSpec.parse("0", "1", "-1", "0"))
    for e in (red.D1, red.D2, red.G1, red.G2):
        np.testing.assert_allclose(values(e), 1.0)
    np.testing.assert_allclose(values(red.S), 0.0)


def test_D1_with_time_varying_b():
    sys = SystemSpec.parse("1", "2 + sin(t)", "1", "0")
    red = reduce(sys)
    assert evaluate(red.D1, 0.0) == pytest.approx(-1.5)
    # cross-check the b' term by a central difference of b
    h = 1e-6
    for t in (0.0, 0.7, 3.1):
        b = evaluate(sys.b, t)
        bp = (evaluate(sys.b, t + h) - evaluate(sys.b, t - h)) / (2 * h)
        expected = (1 * bp - 0 * b) / b + 1 * 0 - b * 1
        assert evaluate(red.D1, t) == pytest.approx(expected, abs=1e-8)


def test_reduction_formulas_hold_structurally():
    sys = SystemSpec.parse("sin(t)", "2 + cos(t)", "-1 - t/(1+t)", "0.3*t/(1+t)")
    red = reduce(sys)
    a, b, c, d = (values(e) for e in sys.coefficients)
    from ltvstab.expr import differentiate

    ap, bp, cp, dp = (values(differentiate(e)) for e in sys.coefficients)
    np.testing.assert_allclose(values(red.D1), (a * bp - ap * b) / b + a * d - b * c, rtol=1e-12)
    np.testing.assert_allclose(values(red.D2), (d * cp - dp * c) / c + a * d - b * c, rtol=1e-12)
    P1 = values(red.P1)
    np.testing.assert_allclose(P1, a + d + bp / b, rtol=1e-12)
    np.testing.assert_allclose(values(red.G1), values(red.D1) + values(differentiate(red.P1)) / 2 - P1**2 / 4, rtol=1e-10)


def test_scalar_equations_examples():
    first, _ = scalar_equations(reduce(SystemSpec.parse("0", "1", "-1", "0")))
    assert evaluate(first.p, 1.0) == 0 and evaluate(first.q, 1.0) == 1

    first, _ = scalar_equations(reduce(SystemSpec.parse("-1", "1", "-1", "-1")))
    assert evaluate(first.p, 0.0) == 2 and evaluate(first.q, 0.0) == 2

    red = reduce(SystemSpec.parse("0", "2 + sin(t)", "1", "0"))
    first, _ = scalar_equations(red)
    np.testing.assert_allclose(values(first.p), -np.cos(TS) / (2 + np.sin(TS)), rtol=1e-12)
    np.testing.assert_allclose(values(first.q), values(red.D1))


def test_scalar_equation_G_matches_G1():
    red = reduce(SystemSpec.parse("0.5*sin(t)", "2 + sin(t)", "-1", "-0.2"))
    first, second = scalar_equations(red)
    np.testing.assert_allclose(values(first.G), values(red.G1), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(values(second.G), values(red.G2), rtol=1e-10, atol=1e-12)


def test_companion_system_of_scalar_equation():
    eq = ScalarEquation.parse("2", "5")
    sys = eq.as_system()
    assert [evaluate(e, 0.0) for e in sys.coefficients] == [0, 1, -5, -2]


def test_real_constants_have_real_G():
    assert check_G_realness(reduce(SystemSpec.parse("-1", "1", "-1", "-1")), GRID).holds


def test_imaginary_a_is_measured_on_the_grid():
    red = reduce(SystemSpec.parse("i", "1", "1", "0"))
    g1 = values(red.G1)
    out = check_G_realness(red, GRID)
    # G1 = a*d - b*c - (a+d)^2/4 = -1 + 1/4 is real here
    assert np.max(np.abs(g1.imag)) < 1e-12
    assert out.holds


def test_small_imaginary_part_fails_realness():
    red = reduce(SystemSpec.parse("0", "1", "-1", "0"))
    tilted = dataclasses.replace(red, G1=parse("1 + 0.001*i"))
    out = check_G_realness(tilted, GRID, tol_im=1e-9)
    assert out.status.value == "Fails"
    assert "G1" in out.note


@pytest.mark.parametrize("b,c", [("0", "1"), ("1", "0")])
def test_zero_constant_b_or_c_is_rejected(b, c):
    with pytest.raises(ApplicabilityError, match="nonvanishing"):
        reduce(SystemSpec.parse("0", b, c, "0"))


def test_vanishing_on_grid_is_rejected():
    with pytest.raises(ApplicabilityError, match=r"b\(t\)"):
        reduce(SystemSpec.parse("0", "sin(t)", "-1", "0"), GRID)
    with pytest.raises(ApplicabilityError, match="c"):
        check_nonvanishing(SystemSpec.parse("0", "1", "exp(-t)", "0"), Grid(0, 100, 64))


def test_negate_phi_example_and_involution():
    sys = SystemSpec.parse("0", "1", "-1", "0")
    neg = transform_negate_phi(sys)
    assert [evaluate(e, 0.0) for e in neg.coefficients] == [0, -1, 1, 0]
    back = transform_negate_phi(neg)
    for e, f in zip(sys.coefficients, back.coefficients):
        np.testing.assert_allclose(values(e), values(f))


def test_negate_phi_preserves_fundamental_matrix_norms():
    sys = SystemSpec.parse("-0.1", "2 + sin(t)", "-1", "0.05*cos(t)")
    grid = Grid(0, 10, 64)
    n1 = integrate_fundamental(sys, grid).norms()
    n2 = integrate_fundamental(transform_negate_phi(sys), grid).norms()
    np.testing.assert_allclose(n1, n2, rtol=1e-8)


# -- properties ---------------------------------------------------------------

reals = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)
nonzero = reals.filter(lambda x: abs(x) > 0.05)


@settings(max_examples=80, deadline=None)
@given(a=reals, b=nonzero, c=nonzero, d=reals)
def test_constant_coefficients_collapse(a, b, c, d):
    red = reduce(SystemSpec.parse(Const(a), Const(b), Const(c), Const(d)))
    det = a * d - b * c
    G = det - (a + d) ** 2 / 4
    for e, v in ((red.D1, det), (red.D2, det), (red.G1, G), (red.G2, G)):
        np.testing.assert_allclose(values(e), v, atol=1e-12, rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=nonzero)
def test_rescaling_b_and_c_leaves_reduction_unchanged(seed, lam):
    rng = np.random.default_rng(seed)
    a, d = random_smooth_coefficient(rng), random_smooth_coefficient(rng)
    b, c = random_smooth_coefficient(rng, True), random_smooth_coefficient(rng, True)
    base = reduce(SystemSpec(a, b, c, d))
    scaled_b = reduce(SystemSpec(a, Mul(Const(lam), b), c, d))
    scaled_c = reduce(SystemSpec(a, b, Mul(Const(lam), c), d))
    # D1 contains -b*c, so scaling b alone scales that term; compare the b'/b pieces
    np.testing.assert_allclose(values(scaled_b.P1), values(base.P1), rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(values(scaled_c.P2), values(base.P2), rtol=1e-9, atol=1e-12)
    # joint scaling b -> lam b, c -> c/lam keeps bc, hence D1 and G1
    joint = reduce(SystemSpec(a, Mul(Const(lam), b), Mul(Const(1 / lam), c), d))
    for e, f in ((base.D1, joint.D1), (base.G1, joint.G1), (base.D2, joint.D2), (base.G2, joint.G2)):
        np.testing.assert_allclose(values(f), values(e), rtol=1e-9, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_scalar_damping_is_minus_P1(seed):
    rng = np.random.default_rng(seed)
    sys = SystemSpec(
        random_smooth_coefficient(rng),
        random_smooth_coefficient(rng, True),
        random_smooth_coefficient(rng, True),
        random_smooth_coefficient(rng),
    )
    red = reduce(sys)
    first, second = scalar_equations(red)
    np.testing.assert_allclose(values(first.p), -values(red.P1), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(values(second.p), -values(red.P2), rtol=1e-12, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_negate_phi_preserves_reduction(seed):
    rng = np.random.default_rng(seed)
    sys = SystemSpec(
        random_smooth_coefficient(rng),
        random_smooth_coefficient(rng, True),
        random_smooth_coefficient(rng, True),
        random_smooth_coefficient(rng),
    )
    r1, r2 = reduce(sys), reduce(transform_negate_phi(sys))
    for name in ("S", "D1", "D2", "G1", "G2"):
        np.testing.assert_allclose(values(getattr(r2, name)), values(getattr(r1, name)), rtol=1e-10, atol=1e-12)
