"""One test per acceptance criterion; each records a PASS/FAIL line for the terminal summary."""
import math
import random
from fractions import Fraction as Fr

import pytest
import sympy as sp

from conftest import record_criterion
from padicwach.analysis import (MahlerDistribution, amice_inverse, amice_velu_extend, dirac_table, psi_dist,
                                psi_dist_moments)
from padicwach.errors import NoConvergence, PrecisionExhausted
from padicwach.filtmod import (ABS_IRRED, NONSPLIT, SPLIT, FilteredPhiModule, charpoly, classify, is_admissible,
                               make_Dab, make_Dkap)
from padicwach.gl2 import (ALPHA, B1, B2, DistributionSeqPair, Gen, LocPolyFunc, Params, ap0_k2_pair,
                           bridge_family, check_bridge, gl2_act, intertwine, seq_conditions_check)
from padicwach.padic import FieldDesc, PadicScalar, vp, vp_factorial, vp_rational
from padicwach.series import TruncSeries, frobenius, gamma_subst, log_pm, psi, q_elem, t_trunc
from padicwach.wach import (ap0_module, psi_membership, psi_on_quotient_check, reduce_mod_X, twist,
                            verify_commutation, wach_example)
from padicwach.wachlift import (Fp2, alpha_bound, char, compare_mod_p, construct_Nkap, corr_modp, ind_omega2, omega,
                                pi_normal_form, predict_Pibar, predict_Vbar, quad_roots, solve_H, unr)


class Checks:
    """Collects named failures so a criterion always records its line before asserting."""

    def __init__(self, num: int):
        self.num, self.count, self.failed = num, 0, []

    def __call__(self, ok, what: str):
        self.count += 1
        if not ok:
            self.failed.append(what)

    def run(self, what: str, fn):
        try:
            self(fn(), what)
        except Exception as e:          # a crash is a failed check, reported with its message
            self(False, f"{what}: {type(e).__name__}: {e}")

    def finish(self, detail: str):
        ok = not self.failed
        msg = f"{detail} ({self.count} checks)" if ok else f"{detail}; failed: {self.failed[:3]}"
        record_criterion(self.num, ok, msg)
        assert ok, msg


def test_criterion_01_operator_identities():
    c = Checks(1)
    F = FieldDesc.qp(5, 12)
    rng = random.Random(1)

    def rep(n, factor):
        cs = [rng.randint(-10 ** 6, 10 ** 6) for _ in range(n)]
        return cs, TruncSeries.from_list(F, cs, K=factor * n + 1)

    for i in range(100):
        n = rng.randint(1, 8)
        cs, f = rep(n, 5)
        c(psi(frobenius(f)).agrees(f, K=n), f"psi phi = id #{i}")
        lam_c = [rng.randint(-999, 999) for _ in range(rng.randint(1, 6))]
        Kb = 5 * (len(lam_c) + 5 * n) + 1
        lam, g = TruncSeries.from_list(F, lam_c, K=Kb), TruncSeries.from_list(F, cs, K=Kb)
        c(psi(lam * frobenius(g)).agrees(psi(lam) * g, K=len(lam_c) + n), f"projection formula #{i}")
        a = rng.choice([2, 3, 6, 7, 11])
        h = TruncSeries.from_list(F, cs, K=5 * a * n + 1)
        c(frobenius(gamma_subst(h, a)) == gamma_subst(frobenius(h), a), f"phi gamma #{i}")
        c(psi(gamma_subst(h, a)).agrees(gamma_subst(psi(h), a), K=a * n), f"psi gamma #{i}")
    c.finish("psi.phi=id, psi(l phi x)=psi(l)x, phi.gamma=gamma.phi, psi.gamma=gamma.psi on 100 reps")


def test_criterion_02_psi_of_q_powers():
    c = Checks(2)
    for p in (3, 5, 7):
        F = FieldDesc.qp(p, 12)
        q = q_elem(F, 80)
        c(psi(q) == TruncSeries.one(F, 80), f"psi(q)=1 p={p}")
        for ell in range(1, 7):
            out = psi(q ** ell)
            c(out.coeff(0) == PadicScalar.from_rational(F, p ** (ell - 1)), f"constant p={p} l={ell}")
            c(all(out.coeff(m).is_zero() for m in range(ell, out.rel)), f"degree p={p} l={ell}")
    c.finish("psi(q^l), l=1..6, p in {3,5,7}: degree <= l-1, constant p^{l-1}")


def test_criterion_03_t_identities():
    c = Checks(3)
    F, K = FieldDesc.qp(5, 12), 60
    t = t_trunc(F, K)
    c(frobenius(t).agrees(t.scale(5), prec=10, K=K), "phi(t) = p t")
    for a in (2, 3, 6, 7, 26):
        c(gamma_subst(t, a).agrees(t.scale(a), prec=10, K=K), f"gamma_{a}(t) = {a} t")
    X = TruncSeries.monomial(F, 1, K)
    c((X * log_pm(1, F, K) * log_pm(-1, F, K)).agrees(t, prec=10, K=K), "t = X log+ log-")
    c.finish("phi(t)=pt, gamma_a(t)=at, t=X log+ log- mod (p^10, X^60)")


def test_criterion_04_wach_examples():
    c = Checks(4)
    F, K = FieldDesc.qp(5, 10), 40
    mods = [wach_example("Qp", F, K, r=r) for r in range(-2, 3)] + [wach_example("supersingular-k2", F, K)] + \
           [wach_example("ap0", F, K, k=k) for k in range(2, 7)]
    for W in mods:
        _, v = verify_commutation(W, 40)
        c(v >= 10, f"commutation {W.kind}")
    rng = random.Random(4)
    pool = [twist(m, -m.weights[0]) for m in mods if m.d == 2]
    for i in range(100):
        W = rng.choice(pool)
        ell = rng.randint(1, 5)
        v = [TruncSeries.from_list(F, [rng.randrange(5 ** 6) for _ in range(10)], K=K) for _ in range(2)]
        c(psi_membership(W, v, ell), f"membership {W.kind} l={ell} #{i}")
    c.finish("commutation 0 mod (p^10, X^40) on 11 examples; psi(X^-l v) bound on 100 samples")


def test_criterion_05_reduction_mod_X():
    c = Checks(5)
    F = FieldDesc.qp(5, 12)
    zero, one = PadicScalar.zero(F), PadicScalar.from_rational(F, 1)
    for k in range(2, 7):
        W = ap0_module(F, 40, k)
        D, ref = reduce_mod_X(W), make_Dkap(k, zero)
        c(charpoly(D) == (PadicScalar.from_rational(F, 5 ** (k - 1)), zero, one), f"charpoly k={k}")
        c(charpoly(D) == charpoly(ref), f"matches D_k,0 k={k}")
        c(sorted(D.jumps) == [0, k - 1] == sorted(ref.jumps), f"jumps k={k}")
        c(is_admissible(D)[0], f"admissible k={k}")
        c(psi_on_quotient_check(W), f"psi on quotient k={k}")
    c.finish("reduce_mod_X(ap0-k), k=2..6: X^2 + p^{k-1}, jumps {0,k-1}, admissible, psi = phi^-1")


def test_criterion_06_classification():
    c = Checks(6)
    F = FieldDesc.qp(5, 12)
    s = lambda x: PadicScalar.from_rational(F, x)
    grid = []
    units = [1, 2, 3, 4, 6, 7, 8, 9, 11, 12]
    for i, u in enumerate(units):
        k = 3 + i % 4
        grid.append((s(u * 5), s(units[(i + 1) % 10] * 5 ** (k - 2)), k, ABS_IRRED))
        grid.append((s(u * 5 ** (k - 1)), s(units[(i + 3) % 10]), k, NONSPLIT))
        grid.append((s(u * 5 ** (k - 1)), s(units[(i + 5) % 10]), k, SPLIT))
    for a, b, k, case in grid:
        c.run(f"grid {case} k={k}", lambda: classify(make_Dab(a, b, k, case)) == case)
    # the three worked cases
    c.run("equal slopes", lambda: classify(make_Dab(s(10), s(15), 3)) == ABS_IRRED)
    c.run("unit beta, generic line", lambda: classify(make_Dab(s(125), s(2), 4, NONSPLIT)) == NONSPLIT)
    c.run("unit beta, line e_beta", lambda: classify(make_Dab(s(125), s(2), 4, SPLIT)) == SPLIT)
    zero = PadicScalar.zero(F)
    bad = FilteredPhiModule(F, ((s(Fr(1, 25)), zero), (zero, s(1))), (-2, 0), (s(1), zero))
    ok, wit = is_admissible(bad)
    c(not ok and wit["object"] == "line", "delta = e_alpha is not admissible")
    c.finish(f"classify(make_Dab) round trip on a {len(grid)}-point grid plus the three worked cases")


def test_criterion_07_lift():
    c = Checks(7)
    F, K = FieldDesc.qp(5, 12), 60
    for k in (3, 4, 5):
        a = alpha_bound(k - 1)
        ap = 5 ** (a + 1)
        try:
            rep = construct_Nkap(k, ap, F, K, C=1)
        except Exception as e:
            c(False, f"k={k}: {type(e).__name__}: {e}")
            continue
        c(rep.H.val() >= 1, f"H = 0 mod p k={k}")
        c(rep.gamma.strictly_improving, f"strict trace k={k}")
        c(compare_mod_p(rep.module, ap0_module(F, K, k)), f"mod p k={k}")
        c(rep.residual >= F.N - a, f"commutation k={k}")
        c(rep.charpoly_ok, f"charpoly k={k}")
    for k, ap, errs in ((4, 25, PrecisionExhausted), (4, 1, NoConvergence)):
        try:
            construct_Nkap(k, ap, F, K, C=1 if errs is PrecisionExhausted else None)
            c(False, f"negative control a_p={ap} did not fail")
        except (NoConvergence, PrecisionExhausted):
            c(True, "negative control")
    c.finish("N_{k,a_p}, k=3,4,5, val(a_p)=alpha(k-1)+1: H=0 mod p, strict trace, = seed mod p; controls fail")


def _expected_pibar(p, k, v, u):
    """The reduction table, transcribed case by case."""
    z, one, w = Fp2(p, 0), char(p), omega(p)
    if 2 <= k <= p + 1:
        return [pi_normal_form(k - 2, z, one)]
    if k == p + 2:
        if v < 1:
            return [pi_normal_form(p - 2, z, w)]
        roots = [x for x in quad_roots(p, u if v == 1 else 0)]
        return sorted(pi_normal_form(p - 2, lam, w) for lam in roots)
    if p + 3 <= k <= 2 * p:
        if v < 1:
            return [pi_normal_form(2 * p - k, z, omega(p, k - 1 - p))]
        if v == 1:
            lam = Fp2(p, (k - 1) * u)
            return [pi_normal_form(k - 3 - p, lam, w), pi_normal_form(2 * p - k, lam.inverse(), omega(p, k - 1 - p))]
        return [pi_normal_form(k - 3 - p, z, w)]
    return None


def _expected_vbar(p, k, v):
    if 2 <= k <= p + 1:
        return ind_omega2(p, k - 1)
    if k == p + 2 and v > 1:
        i = Fp2.sqrt(p, -1)
        return tuple(sorted((unr(p, i) * omega(p), unr(p, -i) * omega(p))))
    if p + 3 <= k <= 2 * p - 1 and v > 1:
        return ind_omega2(p, k - 1)
    return None


def test_criterion_08_tables():
    c = Checks(8)
    cells = 0
    for p in (5, 7):
        c(pi_normal_form(p - 2, Fp2(p, 0), omega(p)) == pi_normal_form(1, Fp2(p, 0), char(p)), f"pi(p-2,0,w) p={p}")
        for k in range(2, 2 * p + 1):
            for v in (Fr(1, 3), Fr(1, 2), Fr(1), Fr(3, 2), Fr(2)):
                for u in ((1, 2) if v == 1 else (0,)):
                    exp_pi = _expected_pibar(p, k, v, u)
                    try:
                        got = list(predict_Pibar(p, k, v, u).labels)
                    except Exception as e:
                        c(False, f"Pibar p={p} k={k} v={v}: {e}")
                        continue
                    c(sorted(got) == sorted(exp_pi), f"Pibar p={p} k={k} v={v}")
                    if p + 3 <= k <= 2 * p and v < 1:
                        c(got[0] == pi_normal_form(k - 1 - p, Fp2(p, 0), char(p)), f"iso p={p} k={k}")
                    exp_v = _expected_vbar(p, k, v)
                    if exp_v is None:
                        continue
                    V = predict_Vbar(p, k, v).labels[0]
                    c((V.chars if hasattr(V, "chars") else V) == exp_v, f"Vbar p={p} k={k} v={v}")
                    c.run(f"corr p={p} k={k} v={v}", lambda: corr_modp(got) == V)
                    cells += 1
    c.finish(f"both tables transcribed at p=5,7; corr_modp(Pibar) = Vbar on {cells} shared cells")


def test_criterion_09_distributions():
    c = Checks(9)
    F = FieldDesc.qp(5, 10)
    rng = random.Random(9)
    coeffs = [Fr(rng.randint(-10 ** 6, 10 ** 6), 5 ** rng.randint(0, 3)) for _ in range(200)]
    w = TruncSeries.from_list(F, coeffs, K=200)
    c(amice_inverse(w).amice() == w, "Amice roundtrip M=200")
    for d in (0, 1):
        for a in (0, 7, 1234):
            T = dirac_table(F, {a: 1}, d, 6, Fr(1, 2))
            X = amice_velu_extend(T, d + 1, 6)
            oracle = dirac_table(F, {a: 1}, d + 1, 6, Fr(1, 2))
            c(all((v - oracle.get(*key)).val() >= 10 for key, v in X.data.items()), f"AV d={d} a={a}")
    for a in range(0, 8):
        M = 5 * a + 10
        mu = MahlerDistribution.dirac(F, 5 * a, M)
        c(psi_dist_moments(mu).c == MahlerDistribution.dirac(F, a, M).c, f"psi(delta_pa) moments a={a}")
        c(psi_dist(mu).c[:M // 5] == psi_dist_moments(mu).c[:M // 5], f"psi sides agree a={a}")
        if a % 5:
            c(all(x.is_zero() for x in psi_dist_moments(MahlerDistribution.dirac(F, a, M)).c), f"psi(delta_a) a={a}")
    c.finish("Amice roundtrip M=200; Amice-Velu at j=d+1, depth 6, mod p^10; psi on Dirac family")


@pytest.fixture(scope="module")
def pair():
    return ap0_k2_pair(p=5, N=12, K=120, depth=2)


def test_criterion_10_fil0(pair):
    c = Checks(10)
    rep = seq_conditions_check(pair)
    c(rep.fil0_ok and all(v >= pair.F.N - 2 for _, v in rep.fil0), "Fil0 at m=1")
    c(rep.order_ok and rep.psi_ok, "order and psi-compatibility")
    mus = list(pair.mu_beta)
    d1 = MahlerDistribution.dirac(pair.F, 1, mus[1].M)
    mus[1] = MahlerDistribution(mus[1].F, (mus[1] + d1).c, mus[1].claimed_r, False)
    bad = seq_conditions_check(DistributionSeqPair(pair.alpha, pair.beta, 2, pair.mu_alpha, mus), ms=(1,))
    located = [key for key, v in bad.fil0 if v < bad.threshold]
    c(not bad.fil0_ok and located == [(1, 1)], f"perturbation located at {located}")
    c.finish(f"Fil0 residuals >= N-2 on the a_p=0, k=2 pair at m=1 (m=2 skipped: {rep.fil0_skipped}); "
             f"perturbation located")


def _shell_oracle_ok(kk, j, p=5):
    a, b = sp.symbols("alpha beta")
    S = Params(a, b, kk, p)
    Tb, Ta = p * b / a, p * a / b
    half = 1 - sp.Rational(1, p)
    up = lambda r, lo: r ** lo / (1 - r)
    down = lambda r, hi: r ** hi / (1 - 1 / r)
    I1 = intertwine(B1(S, ALPHA, 0, 0, j))
    I2 = intertwine(B2(S, ALPHA, -1, kk - 2 - j))
    for z in (Fr(1), Fr(5), Fr(1, 5), Fr(3, 25)):
        v = vp_rational(z, p)
        e1 = up(Tb / p, 0) * half if v >= 0 else Tb ** v
        if sp.simplify(I1(z) - z ** j * e1) != 0:
            return False
        if v >= 1:
            e2 = down(Ta * Tb / p, 0) * half
        else:
            e2 = down(Ta * Tb / p, v - 1) * half + Ta ** v * half * up(Tb / p, v + 1) + Tb ** v * (
                sum(Ta ** w * sp.Rational(p) ** (-w) * half for w in range(v + 1, 1))
                + Ta ** v * sp.Rational(p) ** (-v) * (1 - sp.Rational(2, p)))
        if sp.simplify(I2(z) - z ** j * e2) != 0:
            return False
    return True


def test_criterion_11_intertwining(pair):
    c = Checks(11)
    for kk in range(2, 6):
        for j in range(kk - 1):
            c.run(f"shell oracle k={kk} j={j}", lambda: _shell_oracle_ok(kk, j))
    p, k = 5, 4
    P = Params(Fr(7), Fr(3, 5), k, p)
    for i in range(50):
        rng = random.Random(1000 + i)
        word = []
        for _ in range(rng.randint(1, 4)):
            kind = rng.choice(["diag", "D", "n", "w", "z"])
            arg = {"diag": Fr(rng.choice([1, 2, 3, 4, 6, 7, -1])), "D": rng.randint(-2, 2),
                   "n": Fr(rng.randint(-30, 30), p ** rng.randint(0, 2)), "w": None,
                   "z": Fr(rng.choice([1, 2, 3, 5]))}[kind]
            word.append(Gen(kind, arg))
        f = LocPolyFunc(P, ALPHA)
        for _ in range(2):
            f.add_b1(Fr(rng.randint(-30, 30), p ** rng.randint(0, 2)), rng.randint(-1, 2), rng.randint(0, k - 2),
                     Fr(rng.randint(1, 9)))
        if rng.random() < 0.5:
            f.add_b2(rng.randint(-1, 1), rng.randint(0, k - 2), Fr(rng.randint(1, 9)))
        c.run(f"equivariance word {i}", lambda: intertwine(gl2_act(word, f)).equals(gl2_act(word, intertwine(f))))
    Pq = pair.params()
    for f in bridge_family(Pq, 0, shifts=(0, 1, 2, 3)):
        r = check_bridge(pair, f)
        c(r.ok and r.residual >= pair.F.N - 2, f"bridge residual {r.residual}")
    f1 = bridge_family(Pq)[1]
    wrong = (1 - Pq.beta / Pq.alpha) / (1 - Pq.alpha / Pq.beta)
    c(not check_bridge(pair, f1, constant=wrong).ok, "wrong constant detected")
    c.finish("shell-sum oracle for j <= k-2 <= 3; equivariance on 50 words; bridge mod p^{N-2} on 8 functions")


def test_criterion_12_precision_ledger():
    c = Checks(12)
    F = FieldDesc.qp(5, 30)
    for k in range(2, 9):
        direct = sum(vp(6 ** j - 1, 5) for j in range(1, k))
        c(alpha_bound(k - 1) == direct == (k - 1) + vp_factorial(k - 1, 5), f"alpha k={k}")
        W = ap0_module(F, 30, k)
        sol = solve_H(W.G, [[0, 0], [-(5 ** (direct + 1)), 0]], k, C=1)
        c(sol.total_loss == direct, f"ledger k={k}: {sol.total_loss} vs {direct}")
    c(math.factorial(4) and vp_factorial(5, 5) == 1, "v_p(5!) = 1")
    c.finish("solve_H division loss = alpha(k-1) = (k-1) + v_p((k-1)!) for k=2..8")
