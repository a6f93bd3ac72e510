from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from padicwach.errors import NonSemisimplePhi, NotAdmissible, WeightMismatch
from padicwach.filtmod import (ABS_IRRED, NONSPLIT, SPLIT, FilteredPhiModule, charpoly, classify,
                               is_admissible, make_Dab, make_Dkap, rank_one, tH, tN, twist)
from padicwach.padic import FieldDesc, PadicScalar

F = FieldDesc.qp(5, 12)
E = FieldDesc.eisenstein(5, 12)   # contains sqrt(5)


def s(x, G=F):
    return PadicScalar.from_rational(G, x)


def test_invariants_of_Dab():
    D = make_Dab(s(25), s(5), 4)
    assert tN(D) == -3
    assert tH(D) == -3


@pytest.mark.parametrize("n,h", [(n, h) for n in range(-2, 3) for h in range(-2, 3)])
def test_rank_one_admissibility(n, h):
    D = rank_one(F, s(Fraction(5) ** n * 7), h)
    assert is_admissible(D)[0] == (n == -h)


def test_admissibility_examples():
    r5 = PadicScalar.gen(E)
    D = make_Dab(r5 * 2, r5 * 3, 2, ABS_IRRED, E)
    assert is_admissible(D)[0]
    one, zero = s(1), PadicScalar.zero(F)
    bad = FilteredPhiModule(F, ((s(1) / 25, zero), (zero, one)), (-2, 0), (one, zero))
    ok, wit = is_admissible(bad)
    assert not ok and wit["object"] == "line" and wit["line"] == (one, zero)
    assert is_admissible(make_Dkap(4, s(5)))[0]


def test_classification_examples():
    assert classify(make_Dab(s(25), s(5), 4)) == ABS_IRRED
    assert classify(make_Dab(s(125), s(1), 4, NONSPLIT)) == NONSPLIT
    assert classify(make_Dab(s(125), s(1), 4, SPLIT)) == SPLIT


def test_Dkap_shape():
    k, ap = 4, s(10)
    D = make_Dkap(k, ap)
    assert [D.fil(i) for i in range(0, k + 1)] == ["D", "line", "line", "line", "0"]
    assert D.delta == (s(1), PadicScalar.zero(F))
    c0, c1, _ = charpoly(D)
    assert c0 == s(5 ** (k - 1)) and c1 == -ap


def test_twist_and_errors():
    D = make_Dab(s(25), s(5), 4)
    assert twist(D, 0) == D
    T = twist(D, 1)
    assert T.jumps == (-4, -1) and tN(T) == tN(D) - 2
    with pytest.raises(WeightMismatch):
        make_Dab(s(5), s(5), 4)
    zero = PadicScalar.zero(F)
    jordan = FilteredPhiModule(F, ((s(5), s(1)), (zero, s(5))), (-2, 0), (s(1), s(1)))
    with pytest.raises(NonSemisimplePhi):
        is_admissible(jordan)
    with pytest.raises(NotAdmissible):
        classify(FilteredPhiModule(F, ((s(1) / 5, zero), (zero, s(1) / 25)), (-2, 0), (s(1), zero)))


def test_text_format():
    text = make_Dab(s(25), s(5), 4).to_text()
    assert text.startswith("filtmod{ p=5, N=12, k=4, alpha=") and "jumps=[-3, 0]" in text


units = st.integers(1, 10 ** 6).filter(lambda u: u % 5)


@given(st.integers(2, 8), st.data(), units, units)
def test_classify_roundtrip(k, data, u, w):
    case = data.draw(st.sampled_from([ABS_IRRED, NONSPLIT, SPLIT]))
    if case == ABS_IRRED:
        if k < 3:
            return
        va = data.draw(st.integers(1, k - 2))
    else:
        va = k - 1
    a, b = s(u * 5 ** va), s(w * 5 ** (k - 1 - va))
    if a == b:
        # scalar phi: every line is phi-stable, so the Hodge line breaks admissibility
        assert not is_admissible(make_Dab(a, b, k, case))[0]
        return
    D = make_Dab(a, b, k, case)
    assert classify(D) == case


@given(st.integers(1, 4), units, units)
def test_swap_invariance(h, u, w):
    a, b = s(u * 5 ** h), s(w * 5 ** h)
    k = 2 * h + 1
    assert is_admissible(make_Dab(a, b, k))[0] == is_admissible(make_Dab(b, a, k))[0]


@given(st.integers(2, 8), st.integers(-10 ** 4, 10 ** 4).filter(lambda x: x))
def test_Dkap_charpoly(k, m):
    ap = s(5 * m)
    c0, c1, c2 = charpoly(make_Dkap(k, ap))
    assert (c0, c1, c2) == (s(5 ** (k - 1)), -ap, s(1))
