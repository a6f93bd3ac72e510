"""Locally polynomial functions on Q_p with the GL2(Q_p) action, the
intertwining operator between the two principal series, and the pairing
with psi-compatible sequences of distributions.

Functions are finite sums of two kinds of terms (``k`` is the weight):

* ``B1(a, n, j)``: ``1_{a + p^n Z_p}(z) (z - a)^j``;
* ``B2(n, j)``: ``T^{val z} z^{k-2-j} 1_{val z < -n}`` with ``T = p s/s'``,
  where ``(s, s') = (alpha, beta)`` on the alpha side and
  ``(beta, alpha)`` on the beta side.

Coefficients may be ``Fraction``, sympy expressions or ``PadicScalar``;
only ring operations and a zero test are used.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .analysis import MahlerDistribution, amice_inverse, check_fil0, mahler_coeffs, order_norm
from .errors import GenericityRequired, NeedsBothSides, PrecisionExhausted, UnsupportedElement, UnsupportedInput
from .padic import INF, FieldDesc, PadicScalar, sqrt_into, vp, vp_rational
from .series import TruncSeries, psi as series_psi, psi_rows, t_trunc

ALPHA, BETA = "alpha", "beta"


def _iszero(x) -> bool:
    if isinstance(x, PadicScalar):
        return x.is_zero()
    if isinstance(x, (int, Fraction)):
        return x == 0
    import sympy
    return sympy.cancel(sympy.sympify(x)) == 0


def _val(x: Fraction, p: int):
    return vp_rational(x, p)


def _mod_rep(x: Fraction, p: int, e: int) -> int:
    """Integer congruent to the p-integral rational x modulo p^e."""
    M = p ** e
    return x.numerator * pow(x.denominator, -1, M) % M


def _other(side: str) -> str:
    return BETA if side == ALPHA else ALPHA


@dataclass(frozen=True)
class Params:
    alpha: object
    beta: object
    k: int
    p: int

    def own(self, side: str):
        return self.alpha if side == ALPHA else self.beta

    def ratio(self, side: str):
        """T = p s / s' for the side's own eigenvalue s."""
        s, t = (self.alpha, self.beta) if side == ALPHA else (self.beta, self.alpha)
        return s * self.p / t

    def swapped(self) -> "Params":
        return Params(self.beta, self.alpha, self.k, self.p)

    def check_generic(self):
        if _iszero(self.alpha - self.beta):
            raise GenericityRequired("alpha = beta: the intertwining constant is undefined")
        if _iszero(self.alpha - self.beta * self.p):
            raise GenericityRequired("alpha = p beta: the bridge constant is undefined")

    def C(self):
        """(1 - 1/p)/(1 - beta/alpha), the diagonal constant of I."""
        self.check_generic()
        return (1 - Fraction(1, self.p)) / (1 - self.beta / self.alpha)

    def bridge_constant(self):
        """(1 - beta/alpha)/(1 - alpha/(p beta))."""
        self.check_generic()
        return (1 - self.beta / self.alpha) / (1 - self.alpha / (self.beta * self.p))

    def one(self):
        a = self.alpha
        if isinstance(a, PadicScalar):
            return PadicScalar.from_rational(a.F, 1)
        return a / a if not isinstance(a, (int, Fraction)) else Fraction(1)


# -- functions -----------------------------------------------------------------

def _canon_center(a: Fraction, n: int, p: int) -> Fraction:
    """The representative of a + p^n Z_p of the form u/p^R with 0 <= u < p^{n+R}."""
    R = max(0, -_val(a, p)) if a else 0
    R = max(R, -n)
    u = _mod_rep(a * p ** R, p, n + R)
    return Fraction(u, p ** R)


def _shift_poly(cs: Sequence, d) -> list:
    """Coefficients in (z - b) of sum c_i (z - a)^i, where d = b - a."""
    out = [0] * len(cs)
    for i, c in enumerate(cs):
        if _iszero(c):
            continue
        for t in range(i + 1):
            out[t] = out[t] + c * (math.comb(i, t) * d ** (i - t))
    return out


@dataclass
class LocPolyFunc:
    params: Params
    side: str
    b1: dict = field(default_factory=dict)   # (center, n) -> coeffs of (z - center)^j, j <= k-2
    b2: dict = field(default_factory=dict)   # n -> coeffs indexed by j

    @property
    def p(self) -> int:
        return self.params.p

    @property
    def k(self) -> int:
        return self.params.k

    def _zero_vec(self) -> list:
        return [0] * (self.k - 1)

    def copy(self) -> "LocPolyFunc":
        return LocPolyFunc(self.params, self.side, {key: list(v) for key, v in self.b1.items()},
                           {key: list(v) for key, v in self.b2.items()})

    # -- building ---------------------------------------------------------
    def add_b1(self, a, n: int, j: int, coeff) -> "LocPolyFunc":
        if not 0 <= j <= self.k - 2:
            raise ValueError(f"degree j={j} outside 0..k-2")
        if _iszero(coeff):
            return self
        a = Fraction(a)
        c = _canon_center(a, n, self.p)
        vec = [0] * (j + 1)
        vec[j] = coeff
        shifted = _shift_poly(vec, c - a)
        cur = self.b1.setdefault((c, n), self._zero_vec())
        for i, x in enumerate(shifted):
            cur[i] = cur[i] + x
        return self

    def add_b2(self, n: int, j: int, coeff) -> "LocPolyFunc":
        if not 0 <= j <= self.k - 2:
            raise ValueError(f"degree j={j} outside 0..k-2")
        if _iszero(coeff):
            return self
        cur = self.b2.setdefault(n, self._zero_vec())
        cur[j] = cur[j] + coeff
        return self

    def terms(self) -> Iterable[tuple]:
        for (a, n), cs in self.b1.items():
            for j, c in enumerate(cs):
                if not _iszero(c):
                    yield ("B1", a, n, j, c)
        for n, cs in self.b2.items():
            for j, c in enumerate(cs):
                if not _iszero(c):
                    yield ("B2", n, j, c)

    def has_tail(self) -> bool:
        return any(t[0] == "B2" for t in self.terms())

    def empty_like(self, side: str | None = None) -> "LocPolyFunc":
        return LocPolyFunc(self.params, self.side if side is None else side)

    def __add__(self, other: "LocPolyFunc") -> "LocPolyFunc":
        if other.side != self.side:
            raise ValueError("adding functions from different principal series")
        out = self.copy()
        for t in other.terms():
            if t[0] == "B1":
                out.add_b1(t[1], t[2], t[3], t[4])
            else:
                out.add_b2(t[1], t[2], t[3])
        return out

    def scale(self, s) -> "LocPolyFunc":
        out = self.empty_like()
        for t in self.terms():
            if t[0] == "B1":
                out.add_b1(t[1], t[2], t[3], t[4] * s)
            else:
                out.add_b2(t[1], t[2], t[3] * s)
        return out

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    # -- evaluation -------------------------------------------------------
    def __call__(self, z):
        z = Fraction(z)
        p, k = self.p, self.k
        acc = 0
        vz = _val(z, p)
        for t in self.terms():
            if t[0] == "B1":
                _, a, n, j, c = t
                if _val(z - a, p) >= n:
                    acc = acc + c * (z - a) ** j
            else:
                _, n, j, c = t
                if vz < -n:
                    acc = acc + c * self.params.ratio(self.side) ** vz * z ** (k - 2 - j)
        return acc

    # -- canonical form ---------------------------------------------------
    def bounds(self) -> tuple:
        """(R, M): support radius and finest level needed for the canonical form."""
        p = self.p
        R, M = 0, 0
        for t in self.terms():
            if t[0] == "B1":
                _, a, n, _, _ = t
                R = max(R, -n, -_val(a, p) if a else 0)
                M = max(M, n)
            else:
                R = max(R, t[1])
                M = max(M, -t[1])
        return R, max(M, -R + 1)

    def canonical(self, R: int | None = None, M: int | None = None) -> tuple:
        """Balls u/p^R + p^M Z_p (0 <= u < p^{M+R}) with polynomials, plus the tail at level R."""
        R0, M0 = self.bounds()
        R = R0 if R is None else R
        M = M0 if M is None else M
        if R < R0 or M < M0:
            raise ValueError("canonical form needs R and M at least the bounds")
        p, k = self.p, self.k
        balls: dict = {}
        tail = self._zero_vec()

        def put(a: Fraction, n: int, cs: Sequence):
            base = _mod_rep(a * p ** R, p, n + R)
            for t in range(p ** (M - n)):
                u = base + t * p ** (n + R)
                b = Fraction(u, p ** R)
                sh = _shift_poly(cs, b - a)
                cur = balls.setdefault(u, self._zero_vec())
                for i, x in enumerate(sh):
                    cur[i] = cur[i] + x

        for (a, n), cs in self.b1.items():
            if any(not _iszero(x) for x in cs):
                put(a, n, cs)
        T = self.params.ratio(self.side)
        for n, cs in self.b2.items():
            for j, c in enumerate(cs):
                if _iszero(c):
                    continue
                tail[j] = tail[j] + c
                # shells val z = v for -R <= v < -n are balls of level v+1
                e = k - 2 - j
                for v in range(-R, -n):
                    for d in range(1, p):
                        ctr = Fraction(d) * Fraction(p) ** v
                        vec = [0] * (e + 1)
                        vec[e] = c * T ** v
                        put(ctr, v + 1, _shift_poly(vec, ctr))
        return R, M, balls, tail

    def is_zero(self) -> bool:
        _, _, balls, tail = self.canonical()
        return all(_iszero(x) for cs in balls.values() for x in cs) and all(_iszero(x) for x in tail)

    def equals(self, other: "LocPolyFunc") -> bool:
        return (self - other).is_zero()

    def is_compact(self) -> bool:
        _, _, _, tail = self.canonical()
        return all(_iszero(x) for x in tail)

    def to_text(self) -> str:
        lines = []
        for t in sorted(self.terms(), key=lambda t: str(t[:-1])):
            if t[0] == "B1":
                lines.append(f"B1 {t[1]} {t[2]} {t[3]} {t[4]}")
            else:
                lines.append(f"B2 {t[1]} {t[2]} {t[3]}")
        return "\n".join(lines)


def B1(params: Params, side: str, a, n: int, j: int, coeff=1) -> LocPolyFunc:
    return LocPolyFunc(params, side).add_b1(a, n, j, coeff)


def B2(params: Params, side: str, n: int, j: int, coeff=1) -> LocPolyFunc:
    return LocPolyFunc(params, side).add_b2(n, j, coeff)


# -- the group action ---------------------------------------------------------------

@dataclass(frozen=True)
class Gen:
    """A generator: ('diag', u) = diag(1,u) with u a unit, ('D', e) = diag(1,p^e),
    ('n', b) = [[1,b],[0,1]], ('w',) = [[0,1],[-1,0]], ('z', x) = x * identity."""
    kind: str
    arg: object = None

    def matrix(self, p: int) -> tuple:
        if self.kind == "diag":
            return ((Fraction(1), Fraction(0)), (Fraction(0), Fraction(self.arg)))
        if self.kind == "D":
            return ((Fraction(1), Fraction(0)), (Fraction(0), Fraction(p) ** self.arg))
        if self.kind == "n":
            return ((Fraction(1), Fraction(self.arg)), (Fraction(0), Fraction(1)))
        if self.kind == "w":
            return ((Fraction(0), Fraction(1)), (Fraction(-1), Fraction(0)))
        if self.kind == "z":
            x = Fraction(self.arg)
            return ((x, Fraction(0)), (Fraction(0), x))
        raise UnsupportedElement(f"unknown generator {self.kind}")


def mat_mul2(A, B) -> tuple:
    return tuple(tuple(sum(A[i][t] * B[t][j] for t in range(2)) for j in range(2)) for i in range(2))


def word_matrix(word: Sequence[Gen], p: int) -> tuple:
    M = ((Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)))
    for g in word:
        M = mat_mul2(M, g.matrix(p))
    return M


def _b2_to_b1(params: Params, side: str, n: int, j: int, coeff, new_n: int, out: LocPolyFunc):
    """Rewrite coeff*B2(n, j) as B2(new_n, j) plus shell balls (new_n >= n)."""
    p, k = params.p, params.k
    T = params.ratio(side)
    e = k - 2 - j
    out.add_b2(new_n, j, coeff)
    for v in range(-new_n, -n):
        for d in range(1, p):
            ctr = Fraction(d) * Fraction(p) ** v
            vec = [0] * (e + 1)
            vec[e] = coeff * T ** v
            for i, x in enumerate(_shift_poly(vec, ctr)):
                out.add_b1(ctr, v + 1, i, x)


def _act_gen(g: Gen, f: LocPolyFunc) -> LocPolyFunc:
    P, side = f.params, f.side
    p, k = P.p, P.k
    s = P.own(side)
    T = P.ratio(side)
    out = f.empty_like()
    kind = g.kind
    if kind == "diag":
        u = Fraction(g.arg)
        if u == 0 or _val(u, p) != 0:
            raise UnsupportedElement("diag(1,u) needs a p-adic unit u")
        for t in f.terms():
            if t[0] == "B1":
                _, a, n, j, c = t
                out.add_b1(a / u, n, j, c * u ** j)
            else:
                _, n, j, c = t
                out.add_b2(n, j, c * u ** (k - 2 - j))
        return out
    if kind == "D":
        e = int(g.arg)
        for t in f.terms():
            if t[0] == "B1":
                _, a, n, j, c = t
                out.add_b1(a / Fraction(p) ** e, n - e, j, c * s ** (-e) * Fraction(p) ** (e * j))
            else:
                _, n, j, c = t
                out.add_b2(n + e, j, c * s ** (-e) * T ** e * Fraction(p) ** (e * (k - 2 - j)))
        return out
    if kind == "n":
        b = Fraction(g.arg)
        for t in f.terms():
            if t[0] == "B1":
                _, a, n, j, c = t
                out.add_b1(a + b, n, j, c)
        for n, cs in f.b2.items():
            tmp = f.empty_like()
            need = max(n, -_val(b, p)) if b else n
            for j, c in enumerate(cs):
                if not _iszero(c):
                    _b2_to_b1(P, side, n, j, c, need, tmp)
            for t in tmp.terms():
                if t[0] == "B1":
                    out.add_b1(t[1] + b, t[2], t[3], t[4])
                else:
                    _, nn, j, c = t
                    # b lies in p^{-nn} Z_p: (z - b)^{k-2-j} expands on the same tail
                    e = k - 2 - j
                    for i in range(e + 1):
                        out.add_b2(nn, k - 2 - i, c * math.comb(e, i) * (-b) ** (e - i))
        return out
    if kind == "w":
        for t in f.terms():
            if t[0] == "B1":
                _, a, n, j, c = t
                if a == 0:
                    out.add_b2(n - 1, j, c * (-1) ** j)
                    continue
                v = _val(a, p)
                if v >= n:
                    raise AssertionError("canonical centers of balls through 0 are 0")
                ctr = -1 / a
                # T^{-v} (-a)^j (z - c)^j z^{k-2-j} on c + p^{n-2v} Z_p
                e = k - 2 - j
                base = c * T ** (-v) * (-a) ** j
                for i in range(e + 1):
                    out.add_b1(ctr, n - 2 * v, j + i, base * math.comb(e, i) * ctr ** (e - i))
            else:
                _, n, j, c = t
                out.add_b1(0, n + 1, j, c * (-1) ** (k - 2 - j))
        return out
    if kind == "z":
        x = Fraction(g.arg)
        vx = _val(x, p)
        pref = s ** (-2 * vx) * T ** vx * x ** (k - 2)
        return f.scale(pref)
    raise UnsupportedElement(f"unknown generator {kind}")


def _decompose(M: tuple, p: int) -> list:
    """A word in generators (applied left to right as a product) equal to M."""
    (a, b), (c, d) = M
    det = a * d - b * c
    if det == 0:
        raise UnsupportedElement("singular matrix")

    def diag_word(y: Fraction) -> list:
        e = _val(y, p)
        u = y / Fraction(p) ** e
        out = []
        if u != 1:
            out.append(Gen("diag", u))
        if e:
            out.append(Gen("D", e))
        return out

    if c == 0:
        # (a I) diag(1, d/a) n(b/a)
        word = [Gen("z", a)] if a != 1 else []
        word += diag_word(d / a)
        if b:
            word.append(Gen("n", b / a))
        return word
    # n(a/c) w (-c I) diag(1, det/c^2) n(d/c)
    word = [Gen("n", a / c)] if a else []
    word.append(Gen("w"))
    word.append(Gen("z", -c))
    word += diag_word(det / (c * c))
    if d:
        word.append(Gen("n", d / c))
    return word


def gl2_act(g, f: LocPolyFunc) -> LocPolyFunc:
    """Act by a generator, a word of generators (product order) or a rational 2x2 matrix."""
    if isinstance(g, Gen):
        return _act_gen(g, f)
    if isinstance(g, (list, tuple)) and g and all(isinstance(x, Gen) for x in g):
        for x in reversed(g):
            f = _act_gen(x, f)
        return f
    if isinstance(g, (list, tuple)) and len(g) == 2 and all(len(r) == 2 for r in g):
        M = tuple(tuple(Fraction(x) for x in r) for r in g)
        return gl2_act(_decompose(M, f.p), f) if M != ((1, 0), (0, 1)) else f.copy()
    if isinstance(g, (list, tuple)) and not g:
        return f.copy()
    raise UnsupportedElement(f"cannot act by {g!r}")


# -- intertwining --------------------------------------------------------------------

def _seed_b1(P: Params, j: int) -> LocPolyFunc:
    """I(z^j 1_{Z_p}) = C z^j 1_{Z_p} + z^j T_beta^{val z} (1 - 1_{Z_p})."""
    return B1(P, BETA, 0, 0, j, P.C()).add_b2(0, P.k - 2 - j, 1)


def _seed_b2(P: Params, jj: int) -> LocPolyFunc:
    """I(B2_alpha(-1, jj)): with e = k-2-jj, z^e 1_{pZ_p} + C z^e T_beta^{val z} (1 - 1_{pZ_p})."""
    e = P.k - 2 - jj
    return B1(P, BETA, 0, 1, e, 1).add_b2(-1, jj, P.C())


def intertwine(f: LocPolyFunc) -> LocPolyFunc:
    """The intertwining operator from the alpha side to the beta side.

    Seeds are the two closed formulas; every other term is reached by
    the diagonal and unipotent generators, so I is equivariant for them
    by construction and the remaining relations are tested.
    """
    if f.side != ALPHA:
        raise ValueError("intertwine expects an alpha-side function")
    P = f.params
    P.check_generic()
    p, k = P.p, P.k
    out = LocPolyFunc(P, BETA)
    for t in f.terms():
        if t[0] == "B1":
            _, a, n, j, c = t
            # B1(0, n, j) = (alpha^{-1} p^j)^n D^{-n} B1(0, 0, j)
            img = gl2_act([Gen("n", a), Gen("D", -n)], _seed_b1(P, j))
            out = out + img.scale(c * P.alpha ** (-n) * Fraction(p) ** (n * j))
        else:
            _, n, j, c = t
            # B2(n, j) = (beta p^{-1-(k-2-j)})^{n+1} D^{n+1} B2(-1, j)
            m = n + 1
            img = gl2_act(Gen("D", m), _seed_b2(P, j))
            out = out + img.scale(c * (P.beta * Fraction(p) ** (-1 - (k - 2 - j))) ** m)
    return out


def intertwine_back(g: LocPolyFunc) -> LocPolyFunc:
    """The same construction from the beta side to the alpha side (roles swapped)."""
    if g.side != BETA:
        raise ValueError("intertwine_back expects a beta-side function")
    Q = g.params.swapped()
    h = LocPolyFunc(Q, ALPHA, g.b1, g.b2)
    img = intertwine(h)
    return LocPolyFunc(g.params, ALPHA, img.b1, img.b2)


# -- psi-compatible sequences and the pairing --------------------------------------------

@dataclass
class DistributionSeqPair:
    """mu_{alpha,n}, mu_{beta,n} (n = 0..depth) with psi(mu_{n+1}) = mu_n."""
    alpha: PadicScalar
    beta: PadicScalar
    k: int
    mu_alpha: list | None
    mu_beta: list | None = None
    w_alpha: list | None = None
    w_beta: list | None = None

    @property
    def F(self) -> FieldDesc:
        return self.alpha.F

    @property
    def depth(self) -> int:
        mus = self.mu_alpha if self.mu_alpha is not None else self.mu_beta
        return len(mus) - 1

    def params(self) -> Params:
        return Params(self.alpha, self.beta, self.k, self.F.p)

    def side(self, side: str) -> list:
        mus = self.mu_alpha if side == ALPHA else self.mu_beta
        if mus is None:
            raise NeedsBothSides(f"no {side} sequence in the pair")
        return mus

    @classmethod
    def zero(cls, F: FieldDesc, alpha, beta, k: int, depth: int, M: int) -> "DistributionSeqPair":
        z = MahlerDistribution.from_coeffs(F, [0] * M, exact=True)
        return cls(alpha, beta, k, [z] * (depth + 1), [z] * (depth + 1))


def _binom_val(z: int, n: int) -> int:
    return math.comb(z, n)


def _b1_values(f: LocPolyFunc, N: int, M: int) -> list:
    """Values of z -> f(z / p^N) at z = 0..M-1 (B1 terms only)."""
    p = f.p
    pN = Fraction(p) ** N
    terms = [t for t in f.terms() if t[0] == "B1"]
    vals = []
    for z in range(M):
        x = Fraction(z) / pN
        acc = 0
        for _, a, n, j, c in terms:
            if _val(x - a, p) >= n:
                acc = acc + c * (x - a) ** j
        vals.append(acc)
    return vals


def _required_N(f: LocPolyFunc) -> int:
    p = f.p
    N = 0
    for t in f.terms():
        if t[0] == "B1":
            _, a, n, _, _ = t
            N = max(N, -n, -_val(a, p) if a else 0)
    return N


def _integrate_b1(f: LocPolyFunc, mus: list, N: int | None = None) -> PadicScalar:
    Nf = _required_N(f)
    N = Nf if N is None else N
    if N < Nf:
        raise ValueError(f"support needs N >= {Nf}")
    if N >= len(mus):
        raise UnsupportedInput(f"sequence too short: level {N} needed, depth {len(mus) - 1}")
    mu = mus[N]
    coeffs = mahler_coeffs(_b1_values(f, N, mu.M), f.p).a
    F = mu.F
    acc = PadicScalar.zero(F)
    for a, c in zip(coeffs, mu.c):
        if not _iszero(a):
            acc = acc + c * (a if isinstance(a, PadicScalar) else PadicScalar.from_rational(F, a))
    return acc


def _split(f: LocPolyFunc) -> tuple:
    compact = f.empty_like()
    tails = []
    for t in f.terms():
        if t[0] == "B1":
            compact.add_b1(*t[1:])
        else:
            tails.append(t[1:])
    return compact, tails


def seq_integrate(pair: DistributionSeqPair, f: LocPolyFunc, side: str | None = None,
                  N: int | None = None) -> PadicScalar:
    """int_{p^{-N} Z_p} f mu := int_{Z_p} f(z/p^N) mu_N; tails go through the extension identity."""
    side = f.side if side is None else side
    P = f.params
    compact, tails = _split(f)
    total = _integrate_b1(compact, pair.side(side), N) if compact.b1 else PadicScalar.zero(pair.F)
    if not tails:
        return total
    if pair.mu_beta is None or pair.mu_alpha is None:
        raise NeedsBothSides("tail terms need both sequences of the pair")
    Kc = P.bridge_constant()
    for n, j, c in tails:
        if side == BETA:
            # B1(0, m, jj) on the alpha side has I = X + p^{-m} B2_beta(-m, k-2-jj)
            m, jj = -n, P.k - 2 - j
            src = B1(P, ALPHA, 0, m, jj)
            img = intertwine(src)
            rest, rtails = _split(img)
            coef = None
            for (nn, j2, c2) in rtails:
                if nn == n and j2 == j:
                    coef = c2
                else:
                    rest = rest + B2(P, BETA, nn, j2, c2)
            lhs = seq_integrate(pair, src, ALPHA) / Kc
            val = (lhs - seq_integrate(pair, rest, BETA)) / coef
        else:
            img = intertwine(B2(P, ALPHA, n, j))
            val = seq_integrate(pair, img, BETA) * Kc
        total = total + val * c
    return total


# -- conditions and the bridge identity --------------------------------------------------

@lru_cache(maxsize=None)
def _psi_tail_bound(p: int, M: int, i: int) -> int:
    """min over M <= n < (p+1)M of v_p([X^i] psi(X^n)): the weight of the unknown tail."""
    rows = psi_rows(p, (p + 1) * M)
    best = INF
    for n in range(M, (p + 1) * M):
        r = rows[n]
        if i < len(r) and r[i]:
            best = min(best, vp(r[i], p))
    return best


@dataclass
class ConditionsReport:
    order: list            # per n: order-norm exponent of w_n at r = val(s)
    order_ok: bool
    fil0: list             # per (n, m): minimal residual valuation
    fil0_ok: bool
    psi: list              # per n >= 1: minimal residual valuation on the reliable range
    psi_ok: bool
    psi_first_failure: tuple | None
    threshold: int
    fil0_skipped: list = field(default_factory=list)   # levels m the truncation cannot certify

    @property
    def ok(self) -> bool:
        return self.order_ok and self.fil0_ok and self.psi_ok


def _psi_residual(mu_n: MahlerDistribution, mu_prev: MahlerDistribution, need: int) -> object:
    p = mu_n.F.p
    img = series_psi(mu_n.amice()).coeffs()
    cmin = min((x.val() for x in mu_n.c if not x.is_zero()), default=INF)
    worst = INF
    for i in range(mu_n.M):
        if cmin != INF and _psi_tail_bound(p, mu_n.M, i) + cmin - 1 < need:
            break
        d = img[i] - mu_prev.c[i]
        worst = min(worst, d.val())
    return worst


def seq_conditions_check(pair: DistributionSeqPair, ms: Sequence[int] = (1, 2), threshold: int | None = None,
                         order_slack: float = 1.0) -> ConditionsReport:
    F = pair.F
    thr = F.N - 2 if threshold is None else threshold
    sides = [(sd, s, mus) for sd, s, mus in ((ALPHA, pair.alpha, pair.mu_alpha), (BETA, pair.beta, pair.mu_beta))
             if mus is not None]
    # 1) order certificates of w_n = s^{-n} mu_n, uniform in n
    order = []
    for side, s, mus in sides:
        r = s.val()
        exps = [order_norm(mu.scale(s ** (-n)), r).exponent for n, mu in enumerate(mus)]
        order.append((side, exps))
    order_ok = all(max(e) <= e[0] + order_slack if e[0] != -INF else max(e) == -INF for _, e in order)
    # 2) filtration at level m: alpha^{m-n} int z^j zeta^z mu_{alpha,n} = beta^{m-n} (...)
    fil0 = []
    skipped = []
    fil_ok = True
    if pair.mu_beta is not None and pair.mu_alpha is not None:
        for m in ms:
            try:
                rows = []
                for n in range(pair.depth + 1):
                    res = check_fil0(pair.mu_alpha[n].scale(pair.alpha ** (-n)),
                                     pair.mu_beta[n].scale(pair.beta ** (-n)),
                                     pair.alpha, pair.beta, m, pair.k, threshold=thr)
                    rows.append(((n, m), res.min_residual, res.ok))
            except PrecisionExhausted:
                if m == ms[0]:
                    raise
                skipped.append(m)
                continue
            fil0 += [(key, v) for key, v, _ in rows]
            fil_ok = fil_ok and all(ok for _, _, ok in rows)
    # 3) psi(mu_n) = mu_{n-1}
    psi_res = []
    first = None
    for side, s, mus in sides:
        for n in range(1, len(mus)):
            v = _psi_residual(mus[n], mus[n - 1], thr)
            psi_res.append(((side, n), v))
            if v < thr and first is None:
                first = (side, n)
    return ConditionsReport(order, order_ok, fil0, fil_ok, psi_res, first is None, first, thr, skipped)


@dataclass(frozen=True)
class BridgeResult:
    ok: bool
    residual: object
    lhs: PadicScalar
    rhs: PadicScalar


def check_bridge(pair: DistributionSeqPair, f: LocPolyFunc, guard: int = 2, constant=None) -> BridgeResult:
    """int f mu_alpha = (1 - beta/alpha)/(1 - alpha/(p beta)) int I(f) mu_beta for compact f, I(f)."""
    If = intertwine(f)
    if not f.is_compact() or not If.is_compact():
        raise ValueError("check_bridge needs f and I(f) compactly supported")
    Kc = f.params.bridge_constant() if constant is None else constant
    lhs = seq_integrate(pair, _compact_form(f), ALPHA)
    rhs = seq_integrate(pair, _compact_form(If), BETA) * Kc
    v = (lhs - rhs).val()
    return BridgeResult(v >= pair.F.N - guard, v, lhs, rhs)


def _compact_form(f: LocPolyFunc) -> LocPolyFunc:
    """A compact function with its tail terms rewritten as balls."""
    R, M, balls, tail = f.canonical()
    if not all(_iszero(x) for x in tail):
        raise ValueError("function is not compactly supported")
    out = f.empty_like()
    p = f.p
    for u, cs in balls.items():
        for i, c in enumerate(cs):
            out.add_b1(Fraction(u, p ** R), M, i, c)
    return out


def bridge_family(P: Params, j: int = 0, shifts: Sequence[int] = (0,)) -> list:
    """Compact alpha-side functions with compact image: z^j 1_{Z_p} - p^{-1} z^j 1_{p^{-1}Z_p},
    its rescaling to level 1 and their integer translates."""
    p = P.p
    f0 = B1(P, ALPHA, 0, 0, j) + B1(P, ALPHA, 0, -1, j, -Fraction(1, p))
    f1 = B1(P, ALPHA, 0, 1, j) + B1(P, ALPHA, 0, 0, j, -Fraction(1, p))
    out = []
    for b in shifts:
        for f in (f0, f1):
            out.append(gl2_act(Gen("n", b), f) if b else f)
    return out


# -- the ap = 0, k = 2 pipeline --------------------------------------------------------------

def _ipoly_mul(a: list, b: list) -> list:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _ipoly_add(a: list, b: list) -> list:
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]


def _ipoly_phi(f: list, p: int) -> list:
    """f((1+X)^p - 1) for an integer polynomial f (Horner)."""
    base = [math.comb(p, m) for m in range(p + 1)]
    base[0] = 0
    out = [0]
    for c in reversed(f):
        out = _ipoly_add(_ipoly_mul(out, base), [c])
    return out


def _ipoly_divexact(a: list, m: list) -> list:
    """a / m for monic m, asserting zero remainder."""
    a = list(a)
    dm = len(m) - 1
    if len(a) <= dm:
        if any(a):
            raise ArithmeticError("inexact polynomial division")
        return [0]
    q = [0] * (len(a) - dm)
    for i in range(len(a) - 1, dm - 1, -1):
        c = a[i]
        q[i - dm] = c
        if c:
            for t in range(dm + 1):
                a[i - dm + t] -= c * m[t]
    if any(a[:dm]):
        raise ArithmeticError("inexact polynomial division")
    return q


def psi_sequence_k2(p: int, depth: int, v0=(0, 1)) -> list:
    """A psi-compatible sequence (f_n, g_n) in the lattice of the twisted a_p = 0, k = 2 module.

    With phi(e1) = e2 and phi(e2) = -q^{-1} e1 one has
    psi(f e1 + g e2) = psi(g) e1 - psi(q f) e2; the lift
    g' = phi(f), f' = (kappa - phi(g))/q with kappa = -g(0) sum_{0<i<p} (1+X)^i
    satisfies psi(f' e1 + g' e2) = f e1 + g e2 with integral f', g'.
    """
    q = [math.comb(p, m + 1) for m in range(p)]
    seq = [([int(v0[0])], [int(v0[1])])]
    for _ in range(depth):
        f, g = seq[-1]
        g0 = g[0]
        kappa = [0]
        for i in range(1, p):
            kappa = _ipoly_add(kappa, [-g0 * math.comb(i, t) for t in range(i + 1)])
        num = _ipoly_add(kappa, [-x for x in _ipoly_phi(g, p)])
        f_new = _ipoly_divexact(num, q)
        g_new = _ipoly_phi(f, p)
        seq.append((f_new, g_new))
    return seq


def _trim(F: FieldDesc, poly: list, K: int) -> TruncSeries:
    return TruncSeries.from_list(F, (poly + [0] * K)[:K], K=K)


def ap0_k2_pair(p: int = 5, N: int = 12, K: int = 120, depth: int = 2, v0=(0, 1),
                guard: int = 10) -> DistributionSeqPair:
    """The pair (mu_alpha, mu_beta) attached to a psi-compatible sequence of the
    a_p = 0, k = 2 crystalline representation twisted to weights (0, 1).

    alpha = p/c and beta = -p/c for c^2 = -p; coordinates on e_alpha, e_beta are
    ell_s(v) = (t/X) rho_s . coords(v) with rho_s the eigenrow of phi for c_s,
    normalized so that rho_s(0) pairs to 1 with the filtration line.
    """
    from .wach import ap0_module, rig_eigenrow
    Nw = N + K // (p - 1) + guard
    Fw = FieldDesc.cyclotomic(p, Nw, 1)
    F = FieldDesc.cyclotomic(p, N, 1)
    W = ap0_module(FieldDesc.qp(p, Nw), K, 2)
    c = sqrt_into(-p, Fw)
    one = PadicScalar.from_rational(Fw, 1)
    tX = t_trunc(Fw, K + 1)
    tX = TruncSeries.from_list(Fw, [tX.coeff(i + 1) for i in range(K)], K=K)
    seq = psi_sequence_k2(p, depth, v0)
    out = {}
    for side, cs in ((ALPHA, c), (BETA, -c)):
        rho = rig_eigenrow(W, cs, [one, -(cs.inverse())], K, restamp=True)
        s = PadicScalar.from_rational(Fw, p) / cs
        ws, mus = [], []
        for n, (f, g) in enumerate(seq):
            w = tX * (rho[0] * _trim(Fw, f, K) + rho[1] * _trim(Fw, g, K))
            w = TruncSeries(Fw, w.c, w.s, Nw, w.L, w.K).with_field(F)
            ws.append(w)
            mus.append(amice_inverse(w.scale((s ** n).with_field(F))))
        out[side] = (s.with_field(F), ws, mus)
    (a, wa, ma), (b, wb, mb) = out[ALPHA], out[BETA]
    return DistributionSeqPair(a, b, 2, ma, mb, wa, wb)
