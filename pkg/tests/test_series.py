
import pytest
from hypothesis import given, strategies as st

from padicwach.errors import NonInvertiblePole, UnsupportedCase
from padicwach.padic import FieldDesc, PadicScalar
from padicwach.series import (TruncSeries, frobenius, gamma_subst, log_pm, parse_series, psi,
                              psi_resolvent, q_elem, t_trunc)

F5 = FieldDesc.qp(5, 12)
K = 60


def series(F, coeffs, K=None, L=0):
    return TruncSeries.from_list(F, coeffs, K=K, L=L)


def X(F, K):
    return TruncSeries.monomial(F, 1, K)


def test_phi_examples():
    x = frobenius(X(F5, K))
    assert x == series(F5, [0, 5, 10, 10, 5, 1], K)
    assert frobenius(TruncSeries.one(F5, K)) == TruncSeries.one(F5, K)
    t = t_trunc(F5, K)
    assert frobenius(t).agrees(t.scale(5), prec=10, K=K)
    with pytest.raises(NonInvertiblePole):
        frobenius(TruncSeries.monomial(F5, -1, K))


def test_gamma_examples():
    x = X(F5, K)
    assert gamma_subst(x, 1) == x
    t = t_trunc(F5, K)
    for a in (2, 6, 7):
        assert gamma_subst(t, a).agrees(t.scale(a), prec=10, K=K)
    inv = gamma_subst(TruncSeries.monomial(F5, -1, K), 6)
    assert inv.L == 1
    assert inv.coeff(-1) == PadicScalar.from_rational(F5, 1) / 6


def test_psi_examples():
    one = TruncSeries.one(F5, K)
    assert psi(one) == one
    assert psi(series(F5, [1, 1], K)).is_zero()
    q = q_elem(F5, K)
    assert psi(q) == one


@pytest.mark.parametrize("p", [3, 5, 7])
@pytest.mark.parametrize("ell", range(1, 7))
def test_psi_of_q_powers(p, ell):
    F = FieldDesc.qp(p, 12)
    out = psi(q_elem(F, 80) ** ell)
    assert out.coeff(0) == PadicScalar.from_rational(F, p ** (ell - 1))
    assert all(out.coeff(m).is_zero() for m in range(ell, out.rel))


def test_t_factorization():
    t = t_trunc(F5, K)
    prod = X(F5, K) * log_pm(1, F5, K) * log_pm(-1, F5, K)
    assert prod.agrees(t, prec=10, K=K)


def test_q_constant_term():
    assert q_elem(F5, K).coeff(0) == PadicScalar.from_rational(F5, 5)


@pytest.mark.parametrize("ell", range(1, 11))
def test_psi_preserves_negative_span(ell):
    f = TruncSeries.monomial(F5, -ell, K)
    out = psi(f)
    assert out.L <= ell
    assert all(out.coeff(m).is_zero() for m in range(0, out.rel))


def test_psi_resolvent_cases():
    x = series(F5, [1, 2, 3], 40)
    assert psi_resolvent(x, 0) == frobenius(x)
    for alpha in (PadicScalar.from_rational(F5, 1) / 5, PadicScalar.from_rational(F5, 5)):
        y = psi_resolvent(TruncSeries.one(F5, 40), alpha)
        res = psi(y) - y.scale(alpha) - TruncSeries.one(F5, 40)
        assert res.val_below(res.rel) >= res.prec
    with pytest.raises(UnsupportedCase):
        psi_resolvent(x, 2)


def test_series_text_roundtrip():
    f = series(F5, [3, 0, 7, 1], 10, L=1)
    assert parse_series(str(f), F5) == f


coef = st.lists(st.integers(-10 ** 6, 10 ** 6), min_size=1, max_size=12)


def sized(c, factor):
    """A representative with room for the untruncated image under a degree-``factor`` substitution."""
    return series(F5, c, factor * len(c) + 1)


@given(coef)
def test_psi_left_inverse(c):
    f = sized(c, 5)
    assert psi(frobenius(f)).agrees(f, K=len(c))


@given(coef, coef)
def test_psi_projection_formula(a, b):
    Kb = 5 * (len(a) + 5 * len(b)) + 1
    lam, f = series(F5, a, Kb), series(F5, b, Kb)
    lhs = psi(lam * frobenius(f))
    rhs = psi(lam) * f
    assert lhs.agrees(rhs, K=len(a) + len(b))


@given(coef, st.sampled_from([2, 3, 6, 7, 11]))
def test_operators_commute(c, a):
    f = sized(c, 5 * a)
    assert frobenius(gamma_subst(f, a)) == gamma_subst(frobenius(f), a)
    lhs, rhs = psi(gamma_subst(f, a)), gamma_subst(psi(f), a)
    assert lhs.agrees(rhs, K=a * len(c))


@given(coef, coef, st.sampled_from([2, 6]))
def test_ring_homomorphisms(a, b, g):
    f, h = series(F5, a, 40), series(F5, b, 40)
    assert frobenius(f * h) == frobenius(f) * frobenius(h)
    assert gamma_subst(f * h, g) == gamma_subst(f, g) * gamma_subst(h, g)


def test_psi_tail_is_not_p_adically_negligible():
    """Truncating at X^K perturbs low coefficients of psi by about p^{K/(p-1)}, not by zero."""
    f = TruncSeries.monomial(F5, 40, 41)
    assert 0 < psi(f).coeff(0).val() < F5.N
