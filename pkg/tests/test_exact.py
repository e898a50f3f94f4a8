from fractions import Fraction

import pytest
import sympy as sp
from gmpy2 import mpq
from hypothesis import assume, given
from hypothesis import strategies as st

from oracles import sym
from sfcq.exact import (R2, R3, R6, ExactScalar, ParseError, RationalInterval, arith, enclose,
                        format_scalar, parse_scalar, sign, to_float)

rationals = st.fractions(min_value=-50, max_value=50, max_denominator=40).map(
    lambda f: mpq(f.numerator, f.denominator))
scalars = st.builds(ExactScalar, rationals, rationals, rationals, rationals)


def test_field_closure():
    assert R2 * R3 == R6
    assert (1 + R2) * (1 - R2) == -1
    assert R2 * R6 == 2 * R3
    x = mpq(1, 3) + mpq(1, 3) * R3
    assert x * x == mpq(4, 9) + mpq(2, 9) * R3


def test_arith_ops_and_division_by_zero():
    assert arith(R2, R2, "mul") == 2
    assert arith(1, R3, "sub") == 1 - R3
    assert arith(R6, R3, "div") == R2
    with pytest.raises(ZeroDivisionError):
        arith(R2, 0, "div")
    with pytest.raises(ValueError):
        arith(1, 1, "pow")


def test_sign_examples():
    assert sign(ExactScalar()) == 0
    assert sign(3 - 2 * R2) == 1
    assert sign(7 - 4 * R3) == 1
    assert sign(-7 + 4 * R3) == -1
    # a tiny positive value: (sqrt2 - 1)^12 ~ 2.5e-5
    assert sign((R2 - 1) ** 12) == 1


def test_parse_examples():
    assert parse_scalar("1/3").coords == (mpq(1, 3), 0, 0, 0)
    assert parse_scalar("-1/2*r2").coords == (0, mpq(-1, 2), 0, 0)
    assert parse_scalar("1/3*r3 + 1").coords == (1, 0, mpq(1, 3), 0)
    assert parse_scalar("r6 - r2") == R6 - R2


@pytest.mark.parametrize("text,pos", [("", 0), ("1/3 +", 5), ("2*", 1), ("x", 0), ("1 1", 2)])
def test_parse_errors_carry_position(text, pos):
    with pytest.raises(ParseError) as err:
        parse_scalar(text)
    assert err.value.pos == pos


def test_enclose_examples():
    iv = enclose(mpq(1, 2), 10)
    assert iv.lo == iv.hi == mpq(1, 2)
    iv = enclose(R2, 20)
    assert iv.lo <= mpq(141421356, 10 ** 8) <= iv.hi
    assert iv.width <= mpq(2, 2 ** 20)
    iv = enclose(2 + R3, 10)
    assert mpq(3731, 1000) <= iv.lo and iv.hi <= mpq(3733, 1000)
    with pytest.raises(ValueError):
        enclose(R2, 0)


@given(scalars)
def test_sign_symmetry(x):
    assert sign(x) * sign(-x) in (0, -1)
    assert sign(x * x) in (0, 1)


@given(scalars)
def test_sign_agrees_with_sympy(x):
    s = sp.sign(sym(x))
    assert sign(x) == int(s)


@given(scalars, scalars)
def test_arithmetic_matches_sympy(x, y):
    assert sp.expand(sym(x + y) - (sym(x) + sym(y))) == 0
    assert sp.expand(sym(x * y) - sym(x) * sym(y)) == 0
    if not y.is_zero():
        assert abs(sp.N(sym(x / y) - sym(x) / sym(y), 60)) < sp.Float(10) ** -50


@given(scalars)
def test_canonical_zero(x):
    assert (x - x).is_zero()
    assert (x == 0) == all(c == 0 for c in x.coords)


@given(scalars)
def test_format_parse_roundtrip(x):
    assert parse_scalar(format_scalar(x)) == x
    assert parse_scalar(format_scalar(x).replace(" ", "")) == x


@given(scalars, st.integers(min_value=1, max_value=80))
def test_enclosure_contains_and_nests(x, bits):
    coarse = enclose(x, bits)
    fine = enclose(x, bits + 16)
    assert coarse.lo <= fine.lo and fine.hi <= coarse.hi
    assert coarse.width <= mpq(1, 2 ** bits) * max(mpq(1), abs(coarse.hi), abs(coarse.lo))
    v = sym(x)
    assert sp.Rational(int(coarse.lo.numerator), int(coarse.lo.denominator)) <= v
    assert v <= sp.Rational(int(coarse.hi.numerator), int(coarse.hi.denominator))


@given(rationals, rationals, rationals, rationals)
def test_interval_arithmetic_soundness(a, b, c, d):
    x = RationalInterval(min(a, b), max(a, b))
    y = RationalInterval(min(c, d), max(c, d))
    for p in (x.lo, x.hi, x.mid):
        for q in (y.lo, y.hi, y.mid):
            assert (x + y).contains(p + q)
            assert (x - y).contains(p - q)
            assert (x * y).contains(p * q)
            if not y.contains(0):
                assert (x / y).contains(p / q)


@given(st.fractions(min_value=0, max_value=100, max_denominator=50), st.integers(8, 64))
def test_interval_sqrt_encloses(f, bits):
    iv = RationalInterval(mpq(f.numerator, f.denominator)).sqrt(bits)
    assert iv.lo * iv.lo <= mpq(f.numerator, f.denominator) <= iv.hi * iv.hi


def test_to_float():
    assert abs(to_float(R2 + R3) - (2 ** 0.5 + 3 ** 0.5)) < 1e-15
    assert to_float(mpq(1, 4)) == 0.25
    assert float(ExactScalar(Fraction(1, 2))) == 0.5


def test_empty_interval_rejected():
    with pytest.raises(ValueError):
        RationalInterval(2, 1)
