"""Perturbing the a_p = 0 Wach module to N_{k,a_p}, reduction mod p, and the
mod-p prediction tables."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import (InvalidLabel, NoConvergence, OutOfTableRange, PrecisionExhausted)
from .filtmod import charpoly
from .padic import INF, FieldDesc, PadicScalar, vp
from .series import TruncSeries, frobenius, gamma_subst
from .wach import (WachModule, adj, ap0_module, det, gen_exponent, identity, mat_map, mat_mul,
                   mat_sub, reduce_mod_X, verify_commutation)


def alpha_bound(r: int, eps: int | None = None, p: int = 5) -> int:
    """sum_{j=1}^r v_p(1 - eps^j), eps = 1 + p by default."""
    eps = 1 + p if eps is None else eps
    return sum(vp(eps ** j - 1, p) for j in range(1, r + 1))


# -- the degree-by-degree solve ---------------------------------------------

@dataclass
class HSolution:
    H: tuple
    steps: list = field(default_factory=list)   # (r, divisor valuation, val(H_r))

    @property
    def total_loss(self) -> int:
        return sum(s[1] for s in self.steps)

    def val(self):
        return min((x.val() for row in self.H for x in row), default=INF)


def _const_mat(F: FieldDesc, H0, K: int) -> tuple:
    return tuple(tuple(TruncSeries.const(F, x, K) for x in row) for row in H0)


def solve_H(G: tuple, H0: Sequence[Sequence], k: int, C: int | None = None) -> HSolution:
    """H = H_0 + X H_1 + ... + X^{k-1} H_{k-1} with G gamma(H) = H G mod X^k.

    Step r: (1 - eps^r) H_r = [X^r](G gamma(H_{<r}) - H_{<r} G).
    """
    F = G[0][0].F
    d = len(G)
    a = gen_exponent(F)
    H0 = [[x if isinstance(x, PadicScalar) else PadicScalar.from_rational(F, x) for x in row] for row in H0]
    if C is not None:
        budget = alpha_bound(k - 1, a, F.p) + C
        v0 = min((x.val() for row in H0 for x in row), default=INF)
        if v0 < budget:
            raise PrecisionExhausted(f"val(H_0) = {v0} below the budget alpha(k-1) + C = {budget}")
    coeffs = [H0]
    steps = [(0, 0, min((x.val() for row in H0 for x in row), default=INF))]
    for r in range(1, k):
        Kr = r + 1
        Hs = tuple(tuple(TruncSeries.from_list(F, [coeffs[s][i][j] for s in range(r)] + [0], K=Kr)
                         for j in range(d)) for i in range(d))
        Gt = mat_map(G, lambda f: f.truncate(Kr))
        T = mat_sub(mat_mul(Gt, mat_map(Hs, lambda f: gamma_subst(f, a))), mat_mul(Hs, Gt))
        div = PadicScalar.from_rational(F, 1 - a ** r)
        Hr = [[T[i][j].coeff(r) / div for j in range(d)] for i in range(d)]
        if any(x.prec <= 0 for row in Hr for x in row):
            raise PrecisionExhausted(f"step {r}: precision exhausted by 1 - eps^{r}")
        vr = min((x.val() for row in Hr for x in row), default=INF)
        if C is not None and vr < C:
            raise PrecisionExhausted(f"step {r}: val(H_{r}) = {vr} < C = {C} (alpha budget violated)")
        steps.append((r, div.val(), vr))
        coeffs.append(Hr)
    K = G[0][0].K
    H = tuple(tuple(TruncSeries.from_list(F, [coeffs[s][i][j] for s in range(k)], K=K).extend(K)
                    for j in range(d)) for i in range(d))
    return HSolution(H, steps)


def check_wachclose(G: tuple, H: tuple, k: int):
    """Valuation of G gamma(H) - H G below X^k (condition (2) of the lemma, mod X^k)."""
    a = gen_exponent(G[0][0].F)
    R = mat_sub(mat_mul(G, mat_map(H, lambda f: gamma_subst(f, a))), mat_mul(H, G))
    return min(x.val_below(k) for row in R for x in row)


# -- the fixed point for gamma -------------------------------------------------

def _gamma_inverse(Q: tuple) -> tuple:
    a = gen_exponent(Q[0][0].F)
    gQ = mat_map(Q, lambda f: gamma_subst(f, a))
    D = det(gQ).inverse()
    return mat_map(adj(gQ), lambda f: f * D)


def _restamp(M: tuple, prec: int) -> tuple:
    """Treat the stored digits as exact to ``prec``.

    Per-series absolute precision cannot see that the poles of gamma(Q)^{-1}
    only meet coefficients divisible by X^{k-1}; the output is certified
    afterwards by an integral commutation check instead.
    """
    return mat_map(M, lambda f: TruncSeries(f.F, f.c, f.s, prec, f.L, f.K, f.rel))


def _residual_matrix(Q, G, gQ):
    return mat_sub(mat_mul(Q, mat_map(G, frobenius)), mat_mul(G, gQ))


def residual_profile(R: tuple, K: int) -> tuple:
    """(min_n v_p(R_n), min_n v_p(R_n) + n) over exponents n < K.

    The second entry is the (p,X)-adic valuation, the trace quantity: the
    plain p-adic minimum can sit still for a step while the defect moves up
    in X.
    """
    vmin, vpx = INF, INF
    for row in R:
        for f in row:
            for m in range(min(K, f.K)):
                v = f.coeff(m).val()
                v = f.prec if v == INF else v
                vmin = min(vmin, v)
                vpx = min(vpx, v + m)
    return vmin, vpx


@dataclass
class GammaReport:
    G: tuple
    trace: list           # residual_profile per iterate
    iterations: int
    seed_residual: object

    @property
    def strictly_improving(self) -> bool:
        m = [t[1] for t in self.trace]
        return all(b > a for a, b in zip(m, m[1:]))


def build_gamma(Q: tuple, G_seed: tuple, k: int, target: int, Kp: int | None = None,
                max_iter: int = 60) -> GammaReport:
    """Iterate G <- Q phi(G) gamma(Q)^{-1} until Q phi(G) - G gamma(Q) = 0 mod (p^target, X^Kp).

    Raises NoConvergence when the seed residual is not divisible by X^{k-1},
    when the valuation mass stops rising, or when max_iter is exhausted.
    """
    F = Q[0][0].F
    K = G_seed[0][0].K
    Kp = K if Kp is None else Kp
    a = gen_exponent(F)
    Q = _restamp(Q, F.N)
    gQ = mat_map(Q, lambda f: gamma_subst(f, a))
    gQinv = _restamp(_gamma_inverse(Q), F.N)
    G = _restamp(G_seed, F.N)
    R = _residual_matrix(Q, G, gQ)
    seed_res = min(x.val_below(k - 1) for row in R for x in row)
    if seed_res < target:
        raise NoConvergence(f"seed residual not divisible by X^{k - 1} (valuation {seed_res})")
    trace = [residual_profile(R, Kp)]
    for it in range(1, max_iter + 1):
        if trace[-1][0] >= target:
            return GammaReport(G, trace, it - 1, seed_res)
        G = _restamp(mat_mul(mat_mul(Q, mat_map(G, frobenius)), gQinv), F.N)
        if min(x.val() for row in G for x in row) < 0:
            raise NoConvergence(f"iterate {it} left the integral matrices")
        trace.append(residual_profile(_residual_matrix(Q, G, gQ), Kp))
        if trace[-1][1] <= trace[-2][1]:
            raise NoConvergence(f"(p,X)-adic residual stalled at iteration {it}: {trace}")
    raise NoConvergence(f"no convergence within {max_iter} iterations: {trace}")


# -- assembling N_{k,a_p} --------------------------------------------------

@dataclass
class LiftReport:
    module: WachModule
    H: HSolution
    gamma: GammaReport
    alpha: int
    residual: object
    charpoly_ok: bool
    jumps: tuple


def working_precision(F: FieldDesc, K: int, k: int, guard: int = 4) -> int:
    """Room for the p-adic growth of 1/gamma(q)^{k-1} up to X^K."""
    p = F.p
    return F.N + alpha_bound(k - 1, p=p) + (k - 1) * (1 + -(-(K - 1) // (p - 1))) + guard


def construct_Nkap(k: int, ap, F: FieldDesc, K: int, C: int | None = None, Kp: int | None = None,
                   max_iter: int = 60, H_override=None) -> LiftReport:
    p, N = F.p, F.N
    alpha = alpha_bound(k - 1, p=p)
    Kp = K if Kp is None else Kp
    Nw = working_precision(F, K, k)
    Fw = F.with_N(Nw)
    apw = ap if not isinstance(ap, PadicScalar) else ap.with_field(Fw)
    apw = apw if isinstance(apw, PadicScalar) else PadicScalar.from_rational(Fw, apw)
    seed = ap0_module(Fw, K, k)
    zero = PadicScalar.zero(Fw)
    H0 = [[zero, zero], [-apw, zero]]
    if H_override is None:
        sol = solve_H(seed.G, H0, k, C)
    else:
        sol = HSolution(H_override, [])
    IH = mat_map(identity(Fw, 2, K), lambda f: f)
    IH = tuple(tuple(a + b for a, b in zip(r1, r2)) for r1, r2 in zip(IH, sol.H))
    Q = mat_mul(IH, seed.P)
    rep = build_gamma(Q, seed.G, k, N, Kp, max_iter)
    down = lambda f: f.with_field(F)
    W = WachModule(F, mat_map(Q, down), mat_map(rep.G, down), seed.weights, K, f"N_k{k}_ap")
    _, res = verify_commutation(W, Kp)
    D = reduce_mod_X(W)
    ap_s = apw.with_field(F)
    c0, c1, _ = charpoly(D)
    cp_ok = (c0 - p ** (k - 1)).val() >= N - 1 and (c1 + ap_s).val() >= N - 1
    return LiftReport(W, sol, rep, alpha, res, cp_ok, D.jumps)


# -- reduction mod p ---------------------------------------------------------

def reduce_mod_p(W: WachModule, K: int | None = None) -> tuple:
    """(P mod p, G mod p) as tuples of F_p coefficient lists below X^K."""
    K = W.K if K is None else K
    p = W.F.p

    def red(f: TruncSeries):
        if f.val() < 0:
            raise ValueError("non-integral entry")
        return tuple(f.coeff(m).int_rep() % p for m in range(min(K, f.K)))

    return (mat_map(W.P, red), mat_map(W.G, red))


def compare_mod_p(W1: WachModule, W2: WachModule, K: int | None = None) -> bool:
    K = min(W1.K, W2.K) if K is None else K
    return reduce_mod_p(W1, K) == reduce_mod_p(W2, K)


# -- residue field F_{p^2} ---------------------------------------------------

@dataclass(frozen=True, order=True)
class Fp2:
    """a + b*y in F_p[y]/(y^2 - n), n the least quadratic non-residue."""
    p: int
    a: int
    b: int = 0

    @staticmethod
    def nonres(p: int) -> int:
        return next(x for x in range(2, p) if pow(x, (p - 1) // 2, p) == p - 1)

    def __post_init__(self):
        object.__setattr__(self, "a", self.a % self.p)
        object.__setattr__(self, "b", self.b % self.p)

    def __add__(self, o):
        return Fp2(self.p, self.a + o.a, self.b + o.b)

    def __neg__(self):
        return Fp2(self.p, -self.a, -self.b)

    def __mul__(self, o):
        if isinstance(o, int):
            return Fp2(self.p, self.a * o, self.b * o)
        n = Fp2.nonres(self.p)
        return Fp2(self.p, self.a * o.a + n * self.b * o.b, self.a * o.b + self.b * o.a)

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def inverse(self) -> "Fp2":
        p, n = self.p, Fp2.nonres(self.p)
        nm = (self.a * self.a - n * self.b * self.b) % p
        if nm == 0:
            raise ZeroDivisionError("zero in F_p^2")
        i = pow(nm, -1, p)
        return Fp2(p, self.a * i, -self.b * i)

    @staticmethod
    def sqrt(p: int, x: int) -> "Fp2":
        x %= p
        for a in range(p):
            if (a * a - x) % p == 0:
                return Fp2(p, a)
        n = Fp2.nonres(p)
        for b in range(p):
            if (n * b * b - x) % p == 0:
                return Fp2(p, 0, b)
        raise ValueError("no square root")

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        return f"{self.a}+{self.b}*sqrt({Fp2.nonres(self.p)})"


def quad_roots(p: int, t: int) -> tuple:
    """Roots of x^2 - t x + 1 over F_{p^2}."""
    s = Fp2.sqrt(p, t * t - 4)
    h = pow(2, -1, p)
    return ((Fp2(p, t) + s) * h, (Fp2(p, t) + -s) * h)


# -- characters and labels -----------------------------------------------------

@dataclass(frozen=True, order=True)
class Char:
    """omega^s * unr(c)."""
    p: int
    s: int
    c: Fp2

    def __post_init__(self):
        object.__setattr__(self, "s", self.s % (self.p - 1))

    def __mul__(self, o: "Char") -> "Char":
        return Char(self.p, self.s + o.s, self.c * o.c)

    def __str__(self):
        parts = []
        if self.s:
            parts.append(f"omega^{self.s}" if self.s != 1 else "omega")
        if not (self.c.a == 1 and self.c.b == 0):
            parts.append(f"unr({self.c})")
        return "*".join(parts) or "1"


def char(p: int, s: int = 0, c=1, mu: int = 0) -> Char:
    """omega^s unr(c) mu_{-1}^mu."""
    cc = c if isinstance(c, Fp2) else Fp2(p, c)
    if mu % 2:
        cc = -cc
    return Char(p, s, cc)


def omega(p: int, s: int = 1) -> Char:
    return char(p, s)


def unr(p: int, c) -> Char:
    return char(p, 0, c)


@dataclass(frozen=True, order=True)
class PiLabel:
    """pi(r, lam, eta)."""
    r: int
    lam: Fp2
    eta: Char

    def __str__(self):
        return f"pi({self.r},{self.lam},{self.eta})"


@dataclass(frozen=True, order=True)
class RhoIrr:
    """rho(r, eta) = ind(omega_2^{r+1}) (x) eta."""
    r: int
    eta: Char

    def __str__(self):
        return f"ind(omega2^{self.r + 1})" + ("" if str(self.eta) == "1" else f"*{self.eta}")


@dataclass(frozen=True, order=True)
class RhoSplit:
    """Direct sum of two characters (sorted)."""
    chars: tuple

    def __str__(self):
        return " + ".join(str(c) for c in self.chars)


def _check_r(r: int, p: int):
    if not 0 <= r <= p - 1:
        raise InvalidLabel(f"r={r} outside 0..{p - 1}")


def pi_normal_form(r: int, lam: Fp2, eta: Char) -> PiLabel:
    p = eta.p
    _check_r(r, p)
    if not lam.is_zero():
        return PiLabel(r, lam, eta)
    mu = char(p, 0, 1, 1)
    w = omega(p, r)
    cands = [PiLabel(r, lam, eta), PiLabel(r, lam, eta * mu),
             PiLabel(p - 1 - r, lam, eta * w), PiLabel(p - 1 - r, lam, eta * w * mu)]
    return min(cands)


def rho_normal_form(r: int, eta: Char) -> RhoIrr:
    p = eta.p
    _check_r(r, p)
    mu = char(p, 0, 1, 1)
    w = omega(p, r)
    return min([RhoIrr(r, eta), RhoIrr(r, eta * mu), RhoIrr(p - 1 - r, eta * w),
                RhoIrr(p - 1 - r, eta * w * mu)])


def ind_omega2(p: int, s: int, eta: Char | None = None) -> RhoIrr:
    """ind(omega_2^s) (x) eta for 1 <= s <= p (s = 0, p+1 are reducible)."""
    eta = eta or char(p)
    # ind(omega_2^{s + (p+1)}) = ind(omega_2^s) (x) omega
    while s > p:
        s -= p + 1
        eta = eta * omega(p)
    while s < 1:
        s += p + 1
        eta = eta * omega(p, -1)
    if s == p + 1 or s < 1:
        raise InvalidLabel("ind(omega_2^s) is reducible for s = 0 mod p+1")
    return rho_normal_form(s - 1, eta)


def corr_modp(pis: Sequence[PiLabel]):
    """The mod-p dictionary: pi(r,0,eta) <-> rho(r,eta); for lam != 0 the pair
    pi(r,lam,eta)^ss + pi([p-3-r],lam^{-1},omega^{r+1} eta)^ss <-> the split sum."""
    pis = list(pis)
    if len(pis) == 1 and pis[0].lam.is_zero():
        x = pis[0]
        return rho_normal_form(x.r, x.eta)
    if len(pis) == 2:
        p = pis[0].eta.p
        for x, y in (pis, pis[::-1]):
            if x.lam.is_zero():
                continue
            want = pi_normal_form((p - 3 - x.r) % (p - 1), x.lam.inverse(), omega(p, x.r + 1) * x.eta)
            if pi_normal_form(y.r, y.lam, y.eta) == want:
                a = unr(p, x.lam.inverse()) * omega(p, x.r + 1) * x.eta
                b = unr(p, x.lam) * x.eta
                return RhoSplit(tuple(sorted((a, b))))
    raise InvalidLabel(f"no correspondence for {[str(x) for x in pis]}")


# -- prediction tables ------------------------------------------------------

@dataclass(frozen=True)
class Prediction:
    formula: str
    labels: tuple
    anchor: str

    def __str__(self):
        return " + ".join(str(x) for x in self.labels)


def predict_Pibar(p: int, k: int, val_ap, ap_over_p: int | None = None) -> Prediction:
    """Reduction of Pi(V_{k,a_p}); ``ap_over_p`` is the residue of a_p/p when val(a_p) >= 1."""
    v = Fraction(val_ap)
    if v <= 0:
        raise OutOfTableRange("val(a_p) must be positive")
    one = char(p)
    zero = Fp2(p, 0)
    if 2 <= k <= p + 1:
        return Prediction("pi(k-2,0,1)", (pi_normal_form(k - 2, zero, one),), "br1p4(1)")
    w = omega(p)
    if k == p + 2:
        if v < 1:
            return Prediction("pi(p-2,0,omega) = pi(1,0,1)", (pi_normal_form(p - 2, zero, w),), "br1p4(2a)")
        t = 0 if v > 1 else _need(ap_over_p) % p
        l1, l2 = quad_roots(p, t)
        labs = tuple(sorted((pi_normal_form(p - 2, l1, w), pi_normal_form(p - 2, l2, w))))
        return Prediction("pi(p-2,lam,omega)^ss + pi(p-2,lam^-1,omega)^ss, lam^2-(a_p/p)lam+1=0", labs,
                          "br1p4(2b)")
    if p + 3 <= k <= 2 * p:
        if v < 1:
            return Prediction("pi(2p-k,0,omega^{k-1-p}) = pi(k-1-p,0,1)",
                              (pi_normal_form(2 * p - k, zero, omega(p, k - 1 - p)),), "br1p4(3a)")
        if v == 1:
            lam = Fp2(p, (k - 1) * _need(ap_over_p))
            if lam.is_zero():
                raise OutOfTableRange("(k-1)a_p/p reduces to 0")
            labs = (pi_normal_form(k - 3 - p, lam, w),
                    pi_normal_form(2 * p - k, lam.inverse(), omega(p, k - 1 - p)))
            return Prediction("pi(k-3-p,lam,omega)^ss + pi(2p-k,lam^-1,omega^{k-1-p})^ss, lam=(k-1)a_p/p",
                              labs, "br1p4(3b)")
        return Prediction("pi(k-3-p,0,omega)", (pi_normal_form(k - 3 - p, zero, w),), "br1p4(3c)")
    raise OutOfTableRange(f"k={k} outside 2..2p")


def _need(x):
    if x is None:
        raise OutOfTableRange("residue of a_p/p required for this branch")
    return x


def predict_Vbar(p: int, k: int, val_ap) -> Prediction:
    v = Fraction(val_ap)
    if v <= 0:
        raise OutOfTableRange("val(a_p) must be positive")
    if 2 <= k <= p + 1:
        return Prediction("ind(omega2^{k-1})", (ind_omega2(p, k - 1),), "blz(1)")
    if k == p + 2 and v > 1:
        i = Fp2.sqrt(p, -1)
        w = omega(p)
        chars = tuple(sorted((unr(p, i) * w, unr(p, -i) * w)))
        return Prediction("unr(sqrt(-1))omega + unr(-sqrt(-1))omega", (RhoSplit(chars),), "blz(2)")
    if p + 3 <= k <= 2 * p - 1 and v > 1:
        return Prediction("ind(omega2^{k-1})", (ind_omega2(p, k - 1),), "blz(3)")
    raise OutOfTableRange(f"(k={k}, val={v}) not covered")


def table_cells(p: int) -> list:
    """(k, val, ap_over_p) cells used for the table checks."""
    cells = []
    for k in range(2, 2 * p + 1):
        for v in (Fraction(1, 2), Fraction(1), Fraction(2)):
            cells.append((k, v, 1 if v == 1 else 0))
    return cells
