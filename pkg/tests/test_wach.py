import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from padicwach.errors import NoStabilization, NotFiniteHeightShape, SingularRecursion
from padicwach.filtmod import charpoly, is_admissible, make_Dkap, tH, tN
from padicwach.padic import FieldDesc, PadicScalar
from padicwach.series import TruncSeries, q_elem
from padicwach.wach import (WachModule, adj, d0_stabilize, det_unit, eigen_residual, fil_on_N, mat_vec,
                            phi_module, psi_module, psi_membership, psi_on_quotient_check, reduce_mod_X,
                            rig_eigenbasis, span_gamma_stable, span_psi_stable, twist,
                            verify_commutation, wach_example)

F = FieldDesc.qp(5, 10)
K = 40


def s(x, G=F):
    return PadicScalar.from_rational(G, x)


EXAMPLES = [("Qp", r, 2) for r in range(-2, 3)] + [("supersingular-k2", 0, 2)] + \
           [("ap0", 0, k) for k in range(2, 7)] + [("split", 0, 3)]


@pytest.mark.parametrize("kind,r,k", EXAMPLES)
def test_commutation(kind, r, k):
    W = wach_example(kind, F, K, r=r, k=k)
    _, v = verify_commutation(W)
    assert v >= F.N


def test_displayed_matrices():
    W = wach_example("supersingular-k2", F, K)
    q = q_elem(F, K)
    assert W.P[0][0].is_zero() and W.P[0][1] == -TruncSeries.one(F, K) and W.P[1][0] == q
    W = wach_example("ap0", F, K, k=4)
    assert W.P[1][0] == q ** 3 and W.weights == (-3, 0)
    assert all((x - 1).val_below(1) >= F.N if i == j else x.val_below(1) >= F.N
               for i, row in enumerate(W.G) for j, x in enumerate(row))


def test_corrupted_G_is_detected():
    W = wach_example("supersingular-k2", F, K)
    bump = TruncSeries.from_list(F, [1, 1], K=K)
    bad = WachModule(F, W.P, ((W.G[0][0] * bump, W.G[0][1]), W.G[1]), W.weights, K)
    R, v = verify_commutation(bad)
    assert v < F.N
    low = min(m for row in R for x in row for m in range(K) if x.coeff(m).val() < F.N)
    assert low <= 1


def test_det_unit():
    assert det_unit(wach_example("ap0", F, K, k=3)).coeff(0).val() == 0
    W = wach_example("supersingular-k2", F, K)
    one = TruncSeries.one(F, K)
    with pytest.raises(NotFiniteHeightShape):
        det_unit(WachModule(F, ((one, 0 * one), (0 * one, one)), W.G, (-1, 0), K))


def _vec(W, rng, L=0):
    return [TruncSeries.from_list(W.F, [rng.randrange(5 ** 4) for _ in range(12)], K=W.K).shift(-L)
            for _ in range(W.d)]


@pytest.mark.parametrize("kind,k", [("supersingular-k2", 2), ("ap0", 3), ("Qp", 2)])
def test_psi_left_inverse_of_phi(kind, k):
    W = wach_example(kind, F, 80, k=k, r=-1 if kind == "Qp" else 0)
    e = [TruncSeries.one(F, 80) if i == 0 else TruncSeries.zero(F, 80) for i in range(W.d)]
    back = psi_module(W, phi_module(W, e))
    assert all(x.agrees(y, K=10) for x, y in zip(back, e))


@pytest.mark.parametrize("kind,k", [("supersingular-k2", 2), ("ap0", 3)])
def test_psi_preserves_N(kind, k):
    W = wach_example(kind, F, K, k=k)
    W = twist(W, -W.weights[0])
    rng = random.Random(7)
    for _ in range(100):
        y = psi_module(W, _vec(W, rng))
        assert all(f.L == 0 or all(f.coeff(m).is_zero() for m in range(-f.L, 0)) for f in y)
        assert all(f.val() >= 0 for f in y)


@pytest.mark.parametrize("ell", range(1, 6))
def test_psi_membership_bound(ell):
    W = twist(wach_example("supersingular-k2", F, K), 1)
    rng = random.Random(ell)
    assert all(psi_membership(W, _vec(W, rng), ell) for _ in range(100))


@given(st.integers(2, 6), st.lists(st.integers(0, 5 ** 6), min_size=4, max_size=4))
def test_N_inside_phi_star_N(k, cs):
    W = wach_example("ap0", F, K, k=k)
    h = W.h
    cinv = det_unit(W).inverse()
    v = [TruncSeries.from_list(F, cs[:2], K=K), TruncSeries.from_list(F, cs[2:], K=K)]
    lam = [x * cinv for x in mat_vec(adj(W.P), v)]
    assert all(x.val() >= 0 and x.L == 0 for x in lam)
    back = mat_vec(W.P, lam)
    qh = q_elem(F, K) ** h
    assert all(x == y * qh for x, y in zip(back, v))


def test_fil_on_N():
    W = wach_example("ap0", F, K, k=3)
    assert fil_on_N(W, -W.weights[1]).is_full()
    assert not fil_on_N(W, 1).is_full()


@pytest.mark.parametrize("k", range(2, 7))
def test_reduce_mod_X_ap0(k):
    W = wach_example("ap0", F, K, k=k)
    D = reduce_mod_X(W)
    zero, one = PadicScalar.zero(F), s(1)
    assert D.phi == ((zero, -one), (s(5 ** (k - 1)), zero))
    assert sorted(D.jumps) == [0, k - 1] == sorted(make_Dkap(k, zero).jumps)
    ref = make_Dkap(k, zero)
    assert charpoly(D) == charpoly(ref) and tN(D) == tN(ref) and tH(D) == tH(ref)
    assert is_admissible(D)[0]


@pytest.mark.parametrize("r", range(-2, 3))
def test_reduce_mod_X_rank_one(r):
    D = reduce_mod_X(wach_example("Qp", F, K, r=r))
    assert D.dim == 1 and D.phi[0][0].val() == -r
    assert is_admissible(D)[0]


def test_reduction_of_split_is_admissible():
    assert is_admissible(reduce_mod_X(wach_example("split", F, K, k=3)))[0]


@pytest.mark.parametrize("kind,k", [("supersingular-k2", 2), ("ap0", 4), ("Qp", 2)])
def test_psi_on_quotient(kind, k):
    assert psi_on_quotient_check(wach_example(kind, F, K, k=k))


def test_d0_stabilization():
    W = wach_example("supersingular-k2", F, K)
    S, it, unique = d0_stabilize(W)
    assert unique and it <= K
    assert span_psi_stable(W, S) and span_gamma_stable(W, S)
    S0, it0, _ = d0_stabilize(wach_example("Qp", F, K, r=0))
    assert it0 == 0
    _, _, u = d0_stabilize(wach_example("split", F, K, k=2))
    assert not u


def test_d0_stabilize_budget():
    W = wach_example("ap0", F, K, k=3)
    with pytest.raises(NoStabilization):
        d0_stabilize(W, max_iter=0)


def test_rig_eigenbasis():
    cols = {}
    for N in (10, 16):
        E = FieldDesc.eisenstein(5, N, (5, 0, 1))
        W = wach_example("supersingular-k2", FieldDesc.qp(5, N), K)
        c = PadicScalar.gen(E)        # c^2 = -5, the eigenvalues of P(0)
        alpha, beta = c.inverse(), -c.inverse()
        M = rig_eigenbasis(W, alpha, beta, K=20, restamp=True)
        assert eigen_residual(W, M, (alpha, beta), 20) >= N - 1
        cols[N] = M
    for i in range(2):
        for j in range(2):
            for n in range(20):
                a, b = cols[10][i][j].coeff(n), cols[16][i][j].coeff(n)
                assert (a.with_field(b.F) - b).val() >= 8
    one, zero = TruncSeries.one(F, K), TruncSeries.zero(F, K)
    D = WachModule(F, ((one, zero), (zero, one.scale(s(5)))), ((one, zero), (zero, one)), (0, 0), K)
    M = rig_eigenbasis(D, s(1), s(Fraction(1, 5)), K=10)
    I = TruncSeries.one(F, 10), TruncSeries.zero(F, 10)
    assert M == ((I[0], I[1]), (I[1], I[0]))
    Z = WachModule(F, ((one.scale(s(5)), one), (zero, one)), D.G, (0, 0), K)
    with pytest.raises(SingularRecursion):      # 5 = p * 1 resonates at X-degree 1
        rig_eigenbasis(Z, s(Fraction(1, 5)), s(1), K=4)


def test_twist_moves_weights():
    W = wach_example("ap0", F, K, k=3)
    T = twist(W, 2)
    assert T.weights == (0, 2) and twist(W, 0) is W
    assert verify_commutation(T)[1] >= F.N


def test_text_header():
    assert str(wach_example("ap0", F, K, k=3)).startswith("wach{ d=2, weights=[-2, 0], K=40, N=10, p=5")
