import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from padicwach.errors import DivisionByPrecisionZero, PrecisionExhausted
from padicwach.padic import (INF, FieldDesc, PadicScalar, binom_padic, parse_scalar, sqrt_into,
                             vp_factorial)

P, N = 5, 8
QP = FieldDesc.qp(P, N)
UNR = FieldDesc.unramified(P, N)
EIS = FieldDesc.eisenstein(P, N)


def s(F, x):
    return PadicScalar.from_rational(F, x)


def test_val_examples():
    assert s(QP, P).val() == 1
    assert s(QP, 1).val() == 0
    assert PadicScalar.gen(EIS).val() == Fraction(1, 2)


def test_geometric_inverse():
    x = s(QP, 1) / s(QP, 1 - P)
    assert x == s(QP, sum(P ** i for i in range(N)))


def test_underflow_is_precision_zero():
    x = s(QP, P ** (N - 1)) * P
    assert x.is_zero() and x.val() == INF


def test_division_valuation_and_zero_divisor():
    ap = s(QP, 3 * P)
    assert (s(QP, P ** 2) / ap).val() == 1
    with pytest.raises(DivisionByPrecisionZero):
        s(QP, 1) / PadicScalar.zero(QP)


def test_binomials():
    a = s(QP, 1 + P)
    assert binom_padic(a, 0, QP) == s(QP, 1)
    assert binom_padic(a, 1, QP) == a
    assert binom_padic(a, 2, QP) == s(QP, (1 + P) * P // 2)
    assert binom_padic(s(QP, 7), 25, QP).prec == N - vp_factorial(25, P)


def test_binomial_exhaustion():
    F = FieldDesc.qp(P, 3)
    with pytest.raises(PrecisionExhausted):
        binom_padic(s(F, 2), 125, F)


@pytest.mark.parametrize("a", range(1, 11))
def test_binomial_expansion_matches_integers(a):
    for m in range(a + 2):
        assert binom_padic(s(QP, a), m, QP) == s(QP, math.comb(a, m))


def test_rejects_two_and_bad_polynomials():
    with pytest.raises(ValueError):
        FieldDesc.qp(2, 5)
    with pytest.raises(ValueError):
        FieldDesc.unramified(5, 5, (-4, 0, 1))  # y^2 - 4 splits mod 5
    with pytest.raises(ValueError):
        FieldDesc.eisenstein(5, 5, (-25, 0, 1))


def test_unramified_valuations_integral():
    rng = random.Random(3)
    for _ in range(100):
        c = [rng.randrange(P ** N) for _ in range(2)]
        x = PadicScalar.from_coords(UNR, c)
        if not x.is_zero():
            assert x.val() == int(x.val())


def test_eisenstein_uniformizer_square():
    y = PadicScalar.gen(EIS)
    assert (y * y / P).val() == 0


def test_text_roundtrip():
    for F in (QP, UNR, EIS):
        x = PadicScalar.gen(F) * 7 + 3 if F.d > 1 else s(F, 17)
        assert parse_scalar(str(x), F) == x
    assert str(s(QP, 17)) == "17 mod 5^8"


def test_sqrt_into():
    F = FieldDesc.cyclotomic(5, 10, 1)
    c = sqrt_into(-5, F)
    assert c * c == s(F, -5)
    assert c.val() == Fraction(1, 2)


ints = st.integers(min_value=-10 ** 6, max_value=10 ** 6)


@given(st.sampled_from([QP, UNR, EIS]), ints, ints, ints, ints)
def test_valuation_axioms(F, a, b, c, d):
    x = PadicScalar.from_coords(F, [a, b][:F.d])
    y = PadicScalar.from_coords(F, [c, d][:F.d])
    if x.is_zero() or y.is_zero():
        return
    prod = x * y
    if x.val() + y.val() < min(x.prec, y.prec):
        assert prod.val() == x.val() + y.val()
    tot = x + y
    if not tot.is_zero():
        assert tot.val() >= min(x.val(), y.val())


@given(st.sampled_from([QP, UNR, EIS]), ints, ints)
def test_inverse(F, a, b):
    x = PadicScalar.from_coords(F, [a, b][:F.d])
    if x.is_zero():
        return
    assert (x * x.inverse() - 1).is_zero()
