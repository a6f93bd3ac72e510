"""Fixed absolute precision arithmetic in Q_p and small extensions.

An element is stored as ``p^{-s} * sum(c_i * y^i)`` where the integer
coordinates ``c_i`` are known modulo ``p^{prec+s}``.  The extension is
``Q_p[y]/(g)`` for a monic integer polynomial ``g``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import DivisionByPrecisionZero, PrecisionExhausted

INF = math.inf

KINDS = ("none", "unramified", "eisenstein", "cyclotomic")


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    i = 3
    while i * i <= n:
        if n % i == 0:
            return False
        i += 2
    return True


def vp(n: int, p: int) -> float | int:
    """Valuation of an integer; ``inf`` for zero."""
    if n == 0:
        return INF
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def vp_rational(x: Fraction | int, p: int):
    x = Fraction(x)
    if x == 0:
        return INF
    return vp(x.numerator, p) - vp(x.denominator, p)


def vp_factorial(m: int, p: int) -> int:
    v, q = 0, p
    while q <= m:
        v += m // q
        q *= p
    return v


def _clean_val(v):
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    return v


@dataclass(frozen=True)
class FieldDesc:
    """Precision context: the prime, the cap ``N`` and the extension.

    ``g`` is a monic integer polynomial stored low to high.  It is ``None``
    for Q_p itself.
    """

    p: int
    N: int
    kind: str = "none"
    g: tuple | None = None
    # purely informational (e.g. the level m of a cyclotomic model)
    tag: int = field(default=0, compare=True)

    def __post_init__(self):
        p, g = self.p, self.g
        if not is_prime(p):
            raise ValueError(f"p={p} is not prime")
        if p == 2:
            raise ValueError("p=2 is not supported")
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.kind not in KINDS:
            raise ValueError(f"unknown extension kind {self.kind!r}")
        if self.kind == "none":
            if g is not None:
                raise ValueError("no polynomial expected for Q_p")
            return
        if g is None or len(g) < 3 or g[-1] != 1:
            raise ValueError("g must be monic of degree >= 2")
        if self.kind == "unramified":
            if len(g) != 3:
                raise ValueError("unramified extensions must be quadratic")
            if any(sum(c * pow(x, i, p) for i, c in enumerate(g)) % p == 0 for x in range(p)):
                raise ValueError("g is reducible mod p")
        else:
            if vp(g[0], p) != 1 or any(c % p for c in g[1:-1]):
                raise ValueError("g is not Eisenstein")
            if self.kind == "eisenstein" and len(g) != 3:
                raise ValueError("Eisenstein extensions must be quadratic")

    # -- constructors -------------------------------------------------
    @classmethod
    def qp(cls, p: int, N: int) -> "FieldDesc":
        return cls(p, N)

    @classmethod
    def unramified(cls, p: int, N: int, g: Sequence[int] | None = None) -> "FieldDesc":
        if g is None:
            n = next(a for a in range(2, p) if pow(a, (p - 1) // 2, p) == p - 1)
            g = (-n, 0, 1)
        return cls(p, N, "unramified", tuple(g))

    @classmethod
    def eisenstein(cls, p: int, N: int, g: Sequence[int] | None = None) -> "FieldDesc":
        return cls(p, N, "eisenstein", tuple(g) if g is not None else (-p, 0, 1))

    @classmethod
    def cyclotomic(cls, p: int, N: int, m: int = 1) -> "FieldDesc":
        """Q_p(zeta_{p^m}) as Q_p[y]/(Phi_{p^m}(1+y)), so that zeta = 1+y."""
        if m < 1:
            raise ValueError("m >= 1 required")
        step = p ** (m - 1)
        deg = (p - 1) * step
        g = [0] * (deg + 1)
        for i in range(p):
            n = i * step
            for j in range(n + 1):
                g[j] += math.comb(n, j)
        return cls(p, N, "cyclotomic", tuple(g), tag=m)

    # -- structure ----------------------------------------------------
    @property
    def d(self) -> int:
        return 1 if self.g is None else len(self.g) - 1

    @property
    def e(self) -> int:
        return self.d if self.kind in ("eisenstein", "cyclotomic") else 1

    def with_N(self, N: int) -> "FieldDesc":
        return FieldDesc(self.p, N, self.kind, self.g, self.tag)

    def reduce(self, a: list) -> list:
        """Reduce an integer polynomial in y modulo g (in place); returns length d."""
        d = self.d
        if len(a) <= d:
            return a + [0] * (d - len(a))
        g = self.g
        for k in range(len(a) - 1, d - 1, -1):
            c = a[k]
            if c:
                base = k - d
                for i in range(d):
                    if g[i]:
                        a[base + i] -= c * g[i]
        return a[:d]

    def polymul(self, a: Sequence[int], b: Sequence[int]) -> list:
        d = self.d
        if d == 1:
            return [a[0] * b[0]]
        out = [0] * (2 * d - 1)
        for i, x in enumerate(a):
            if x:
                for j, z in enumerate(b):
                    if z:
                        out[i + j] += x * z
        return self.reduce(out)

    def relation(self) -> str:
        if self.g is None:
            return ""
        d = self.d
        terms = [(-c, i) for i, c in enumerate(self.g[:-1]) if c]
        return f"y^{d} = " + _poly_str(terms)

    def __str__(self):
        base = f"Q_{self.p} mod {self.p}^{self.N}"
        if self.g is None:
            return base
        return f"{base} [{self.kind}; {self.relation()}]"


def _mono(i: int) -> str:
    return "" if i == 0 else ("y" if i == 1 else f"y^{i}")


def _poly_str(terms) -> str:
    if not terms:
        return "0"
    out = []
    for k, (c, i) in enumerate(terms):
        m = _mono(i)
        mag = abs(c) if k else c
        body = str(mag) if not m else (m if mag == 1 else ("-" + m if mag == -1 else f"{mag}*{m}"))
        if k:
            out.append((" - " if c < 0 else " + ") + body)
        else:
            out.append(body)
    return "".join(out)


class PadicScalar:
    """Immutable element of ``FieldDesc`` at capped absolute precision."""

    __slots__ = ("F", "c", "s", "prec", "exact_zero")

    def __init__(self, F: FieldDesc, c: Iterable[int], s: int = 0, prec: int | None = None,
                 exact_zero: bool = False):
        c = list(c)
        if len(c) != F.d:
            c = F.reduce(c) if len(c) > F.d else c + [0] * (F.d - len(c))
        prec = F.N if prec is None else min(prec, F.N)
        p = F.p
        if exact_zero or prec + s <= 0:
            c = [0] * F.d
            s = 0 if exact_zero else s
        else:
            M = p ** (prec + s)
            c = [x % M for x in c]
            while s > 0 and all(x % p == 0 for x in c) and any(c):
                c = [x // p for x in c]
                s -= 1
        if not any(c):
            s = 0
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "c", tuple(c))
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "prec", prec)
        object.__setattr__(self, "exact_zero", exact_zero)

    def __setattr__(self, *a):
        raise AttributeError("PadicScalar is immutable")

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, F: FieldDesc) -> "PadicScalar":
        return cls(F, [0], exact_zero=True)

    @classmethod
    def from_rational(cls, F: FieldDesc, x, prec: int | None = None) -> "PadicScalar":
        x = Fraction(x)
        if x == 0:
            return cls.zero(F)
        p = F.p
        prec = F.N if prec is None else prec
        den = x.denominator
        s = 0
        while den % p == 0:
            den //= p
            s += 1
        M = p ** max(prec + s, 1)
        return cls(F, [x.numerator * pow(den, -1, M)], s, prec)

    @classmethod
    def from_coords(cls, F: FieldDesc, coords: Sequence, prec: int | None = None) -> "PadicScalar":
        """Coordinates may be ints or Fractions (their p-denominators become a shift)."""
        fr = [Fraction(a) for a in coords]
        p = F.p
        prec = F.N if prec is None else prec
        vds = [vp(f.denominator, p) for f in fr]
        s = max(vds, default=0)
        M = p ** max(prec + s, 1)
        c = []
        for f, vd in zip(fr, vds):
            unit = f.denominator // p ** vd
            c.append(f.numerator * p ** (s - vd) * pow(unit, -1, M))
        return cls(F, c, s, prec)

    @classmethod
    def gen(cls, F: FieldDesc) -> "PadicScalar":
        """The generator y of the extension."""
        if F.d == 1:
            raise ValueError("Q_p has no extension generator")
        return cls(F, [0, 1])

    def coerce(self, x) -> "PadicScalar":
        if isinstance(x, PadicScalar):
            if x.F != self.F:
                if x.F.p == self.F.p and x.F.g == self.F.g:
                    return x.with_field(self.F)
                raise ValueError("mixing scalars from different fields")
            return x
        return PadicScalar.from_rational(self.F, x)

    def with_field(self, F: FieldDesc) -> "PadicScalar":
        """Move to a context with the same extension but another cap."""
        if self.exact_zero:
            return PadicScalar.zero(F)
        return PadicScalar(F, self.c, self.s, min(self.prec, F.N))

    # -- inspection ---------------------------------------------------
    def is_zero(self) -> bool:
        return not any(self.c)

    def val(self):
        """Valuation normalised by val(p)=1; ``inf`` when zero at precision."""
        if not any(self.c):
            return INF
        p, e = self.F.p, self.F.e
        if e == 1:
            return min(vp(x, p) for x in self.c) - self.s
        return _clean_val(min(Fraction(vp(x, p)) + Fraction(i, e) for i, x in enumerate(self.c) if x) - self.s)

    def floor_val(self) -> int:
        v = self.val()
        return self.prec if v == INF else math.floor(v)

    def lift(self) -> tuple:
        """Exact rational representative coordinates."""
        ps = self.F.p ** self.s
        return tuple(Fraction(x, ps) for x in self.c)

    def int_rep(self) -> int:
        if self.F.d != 1 or self.s:
            raise ValueError("not an integer of Q_p")
        return self.c[0]

    def rational(self) -> Fraction:
        if self.F.d != 1:
            raise ValueError("element of an extension")
        x = self.c[0]
        M = self.F.p ** (self.prec + self.s)
        if x > M // 2:
            x -= M
        return Fraction(x, self.F.p ** self.s)

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other):
        o = self.coerce(other)
        if self.exact_zero:
            return o
        if o.exact_zero:
            return self
        p = self.F.p
        s = max(self.s, o.s)
        a, b = p ** (s - self.s), p ** (s - o.s)
        return PadicScalar(self.F, [x * a + y * b for x, y in zip(self.c, o.c)], s, min(self.prec, o.prec))

    __radd__ = __add__

    def __neg__(self):
        if self.exact_zero:
            return self
        return PadicScalar(self.F, [-x for x in self.c], self.s, self.prec)

    def __sub__(self, other):
        return self + (-self.coerce(other))

    def __rsub__(self, other):
        return self.coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, int) and not isinstance(other, bool):
            if other == 0:
                return PadicScalar.zero(self.F)
            if self.exact_zero:
                return self
            # multiplication by an exact integer cannot lose precision
            v = vp(other, self.F.p)
            return PadicScalar(self.F, [x * other for x in self.c], self.s, self.prec + v)
        o = self.coerce(other)
        if self.exact_zero or o.exact_zero:
            return PadicScalar.zero(self.F)
        prec = min(self.prec + o.floor_val(), o.prec + self.floor_val())
        return PadicScalar(self.F, self.F.polymul(self.c, o.c), self.s + o.s, prec)

    __rmul__ = __mul__

    def inverse(self) -> "PadicScalar":
        v = self.val()
        if v == INF:
            raise DivisionByPrecisionZero(f"cannot invert an element that is zero mod {self.F.p}^{self.prec}")
        prec = math.floor(self.prec - 2 * v)
        F = self.F
        if F.d == 1:
            x = self.c[0]
            w = vp(x, F.p)
            u = x // F.p ** w
            e = self.s - w
            sh = max(0, -e)
            M = F.p ** max(prec + sh, 1)
            return PadicScalar(F, [pow(u, -1, M) * F.p ** max(e, 0)], sh, prec)
        z = _solve_mult(F, self.c)
        ps = F.p ** self.s
        return PadicScalar.from_coords(F, [t * ps for t in z], prec)

    def __truediv__(self, other):
        o = self.coerce(other)
        if o.exact_zero or o.is_zero():
            raise DivisionByPrecisionZero("division by an element indistinguishable from zero")
        return self * o.inverse()

    def __rtruediv__(self, other):
        return self.coerce(other) / self

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        result = PadicScalar.from_rational(self.F, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __eq__(self, other):
        try:
            o = self.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return (self - o).is_zero()

    __hash__ = None

    def sqrt(self) -> "PadicScalar":
        """Square root in Q_p (Hensel lifting); only for Q_p elements."""
        F = self.F
        if F.d != 1:
            raise NotImplementedError("square roots are only implemented over Q_p")
        v = self.val()
        if v == INF:
            return PadicScalar(F, [0], 0, self.prec // 2)
        if v % 2:
            raise ValueError("odd valuation: no square root in Q_p")
        p = F.p
        x = self.c[0]
        w = vp(x, p)
        u = x // p ** w
        r0 = next((r for r in range(1, p) if (r * r - u) % p == 0), None)
        if r0 is None:
            raise ValueError("unit part is not a square mod p")
        prec_u = self.prec + self.s - w
        M = p ** max(prec_u, 1)
        r, k = r0, 1
        while k < prec_u:
            k = min(2 * k, prec_u)
            Mk = p ** k
            r = (r - (r * r - u) * pow(2 * r, -1, Mk)) % Mk
        half = v // 2
        out = PadicScalar(F, [r % M], 0, prec_u)
        return out * PadicScalar.from_rational(F, Fraction(p) ** half)

    def residue(self) -> int:
        """Reduction mod p of an integral Q_p element."""
        if self.F.d != 1 or self.val() < 0:
            raise ValueError("residue needs an integral Q_p element")
        return self.c[0] % self.F.p

    # -- text ---------------------------------------------------------
    def __str__(self):
        if self.exact_zero:
            return "0"
        F = self.F
        sh = f"*{F.p}^-{self.s}" if self.s else ""
        terms = [(c, i) for i, c in enumerate(self.c) if c]
        if not terms:
            body = "0"
        else:
            parts = []
            for c, i in terms:
                m = _mono(i)
                coef = f"{c}{sh}"
                parts.append(coef if not m else f"{coef}*{m}")
            body = " + ".join(parts)
        out = f"{body} mod {F.p}^{self.prec}"
        if F.g is not None:
            out += "; " + F.relation()
        return out

    __repr__ = __str__


def _solve_mult(F: FieldDesc, c: Sequence[int]) -> list:
    """Exact inverse of the representative c in Q[y]/(g), as Fractions."""
    d = F.d
    cols = []
    basis = [0] * d
    for j in range(d):
        e = list(basis)
        e[j] = 1
        cols.append(F.polymul(c, e))
    A = [[Fraction(cols[j][i]) for j in range(d)] + [Fraction(int(i == 0))] for i in range(d)]
    for col in range(d):
        piv = next(r for r in range(col, d) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        inv = 1 / A[col][col]
        A[col] = [x * inv for x in A[col]]
        for r in range(d):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return [A[i][d] for i in range(d)]


def binom_padic(a, m: int, F: FieldDesc | None = None) -> PadicScalar:
    """Binomial coefficient a(a-1)...(a-m+1)/m!.

    For a Python integer the result is exact at full precision; for a
    ``PadicScalar`` the answer carries precision ``N - v_p(m!)``.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    if isinstance(a, int):
        if F is None:
            raise ValueError("a field is needed for integer input")
        num = 1
        for i in range(m):
            num *= a - i
        return PadicScalar.from_rational(F, Fraction(num, math.factorial(m)))
    F = a.F
    if a.val() < 0:
        raise ValueError("binom_padic needs an integral argument")
    vf = vp_factorial(m, F.p)
    prec = min(a.prec, F.N) - vf
    if prec <= 0:
        raise PrecisionExhausted(f"v_p({m}!)={vf} exhausts precision {F.N}")
    ps = F.p ** a.s
    acc = [ps ** 0] + [0] * (F.d - 1)
    for i in range(m):
        term = list(a.c)
        term[0] -= i * ps
        acc = F.polymul(acc, term)
    den = math.factorial(m) * ps ** m
    return PadicScalar.from_coords(F, [Fraction(x, den) for x in acc], prec)


_TERM = re.compile(r"^\s*(-?\d+)(?:\*(\d+)\^-(\d+))?(?:\*y(?:\^(\d+))?)?\s*$")


def parse_scalar(text: str, F: FieldDesc | None = None) -> PadicScalar:
    """Inverse of ``str`` for the ``c mod p^N[; y^d = ...]`` format."""
    text = text.strip()
    if text == "0":
        if F is None:
            raise ValueError("exact zero needs a field")
        return PadicScalar.zero(F)
    body, _, rel = text.partition(";")
    m = re.match(r"^(.*) mod (\d+)\^(\d+)\s*$", body)
    if not m:
        raise ValueError(f"cannot parse scalar {text!r}")
    expr, p, prec = m.group(1), int(m.group(2)), int(m.group(3))
    if F is None:
        if rel.strip():
            g = _parse_relation(rel)
            kind = "unramified" if g[0] % p else "eisenstein"
            F = FieldDesc(p, prec, kind, g)
        else:
            F = FieldDesc(p, prec)
    coords = [Fraction(0)] * F.d
    for t in expr.split(" + "):
        tm = _TERM.match(t)
        if not tm:
            raise ValueError(f"bad term {t!r}")
        c = Fraction(int(tm.group(1)))
        if tm.group(2):
            c /= Fraction(int(tm.group(2))) ** int(tm.group(3))
        i = 0
        if "*y" in t:
            i = int(tm.group(4) or 1)
        coords[i] += c
    return PadicScalar.from_coords(F, coords, prec)


def _parse_relation(rel: str) -> tuple:
    m = re.match(r"^\s*y\^(\d+) = (.*)$", rel)
    if not m:
        raise ValueError(f"bad relation {rel!r}")
    d = int(m.group(1))
    g = [0] * d + [1]
    expr = m.group(2).replace(" - ", " + -")
    for t in expr.split(" + "):
        t = t.strip()
        neg = t.startswith("-")
        t = t[1:] if neg else t
        if "y" in t:
            coef, _, mono = t.rpartition("y")
            coef = coef.rstrip("*") or "1"
            i = int(mono[1:]) if mono.startswith("^") else 1
        else:
            coef, i = t, 0
        g[i] -= (-1 if neg else 1) * int(coef)
    return tuple(g)


def gauss_sum(F: FieldDesc) -> PadicScalar:
    """sum_a (a/p) zeta^a in a cyclotomic model; its square is (-1)^((p-1)/2) p."""
    if F.kind != "cyclotomic":
        raise ValueError("needs a cyclotomic model")
    p = F.p
    zeta_p = (PadicScalar.gen(F) + 1) ** (p ** (F.tag - 1))
    total = PadicScalar.zero(F)
    power = PadicScalar.from_rational(F, 1)
    for a in range(1, p):
        power = power * zeta_p
        leg = 1 if pow(a, (p - 1) // 2, p) == 1 else -1
        total = total + power * leg
    return total


def sqrt_into(x, F: FieldDesc) -> PadicScalar:
    """A square root of a rational (or Q_p element) inside the model ``F``.

    Even valuation: Hensel in Q_p.  Odd valuation: via the Gauss sum when
    ``F`` is cyclotomic, or via the generator when ``F`` is Eisenstein with
    ``y^2 = c p`` for a suitable unit c.
    """
    Fq = FieldDesc.qp(F.p, F.N + 2)
    xq = x if isinstance(x, PadicScalar) else PadicScalar.from_rational(Fq, x)
    xq = xq.with_field(Fq) if xq.F != Fq else xq
    v = xq.val()
    if v % 2 == 0:
        r = xq.sqrt()
        return _qp_into(r, F)
    p = F.p
    if F.kind == "cyclotomic":
        pstar = p if p % 4 == 1 else -p
        r = (xq / pstar).sqrt()
        return _qp_into(r, F) * gauss_sum(F)
    if F.kind == "eisenstein" and F.d == 2 and F.g[1] == 0:
        c = -F.g[0]
        r = (xq / c).sqrt()
        return _qp_into(r, F) * PadicScalar.gen(F)
    raise ValueError("no square root available in this model")


def _qp_into(x: PadicScalar, F: FieldDesc) -> PadicScalar:
    coords = [x.c[0]] + [0] * (F.d - 1)
    return PadicScalar(F, coords, x.s, min(x.prec, F.N))
