"""Truncated Laurent series over O_E with the operators phi, gamma_a and psi.

A ``TruncSeries`` is a finitely supported representative: the stored
coefficients of ``X^m`` for ``-L <= m < K``.  Operators act exactly on the
representative and then truncate at ``K``.  ``rel`` is the exponent below
which the representative is meaningful as the image of the caller's input
(for psi this is ``(K-1)//p + 1``).
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

from .errors import NonInvertiblePole, PrecisionExhausted, UnsupportedCase, DivisionByPrecisionZero
from .padic import INF, FieldDesc, PadicScalar, vp


# -- Kronecker substitution -------------------------------------------------

def _conv(a: Sequence[int], b: Sequence[int], n_out: int) -> list:
    """First n_out coefficients of the product of two nonnegative integer polynomials."""
    a = a[:n_out]
    b = b[:n_out]
    if not a or not b:
        return [0] * n_out
    ma, mb = max(a), max(b)
    if ma == 0 or mb == 0:
        return [0] * n_out
    if len(a) < 8 or len(b) < 8:
        out = [0] * n_out
        for i, x in enumerate(a):
            if x:
                lim = min(len(b), n_out - i)
                for j in range(lim):
                    out[i + j] += x * b[j]
        return out
    bits = ma.bit_length() + mb.bit_length() + min(len(a), len(b)).bit_length() + 1
    nb = (bits + 7) // 8
    A = int.from_bytes(b"".join(x.to_bytes(nb, "little") for x in a), "little")
    B = int.from_bytes(b"".join(x.to_bytes(nb, "little") for x in b), "little")
    C = A * B
    raw = C.to_bytes((C.bit_length() + 7) // 8 + nb, "little")
    out = [int.from_bytes(raw[i * nb:(i + 1) * nb], "little") for i in range(min(n_out, len(a) + len(b) - 1))]
    return out + [0] * (n_out - len(out))


# -- the series type ------------------------------------------------------

class TruncSeries:
    """Laurent representative ``p^{-s} * sum_i y^i sum_m c[i][m+L] X^m``."""

    __slots__ = ("F", "c", "s", "prec", "L", "K", "rel")

    def __init__(self, F: FieldDesc, c: Sequence[Sequence[int]], s: int = 0, prec: int | None = None,
                 L: int = 0, K: int | None = None, rel: int | None = None):
        p = F.p
        prec = F.N if prec is None else min(prec, F.N)
        width = len(c[0]) if c else 0
        K = width - L if K is None else K
        width = L + K
        comps = []
        for comp in c:
            comp = list(comp[:width])
            if len(comp) < width:
                comp += [0] * (width - len(comp))
            comps.append(comp)
        while len(comps) < F.d:
            comps.append([0] * width)
        if prec + s <= 0:
            comps = [[0] * width for _ in comps]
            s = 0
        else:
            M = p ** (prec + s)
            comps = [[x % M for x in comp] for comp in comps]
            while s > 0:
                g = 0
                for comp in comps:
                    g = math.gcd(g, *comp) if comp else g
                if g == 0 or g % p:
                    break
                comps = [[x // p for x in comp] for comp in comps]
                s -= 1
            if all(not any(comp) for comp in comps):
                s = 0
        # drop identically zero pole coefficients
        while L > 0 and all(comp[0] == 0 for comp in comps):
            comps = [comp[1:] for comp in comps]
            L -= 1
        self.F = F
        self.c = tuple(tuple(comp) for comp in comps)
        self.s = s
        self.prec = prec
        self.L = L
        self.K = K
        self.rel = K if rel is None else min(rel, K)

    # -- constructors ---------------------------------------------------
    @classmethod
    def from_list(cls, F: FieldDesc, coeffs: Sequence, K: int | None = None, L: int = 0,
                  prec: int | None = None) -> "TruncSeries":
        """Coefficients (ints, Fractions or PadicScalars) of X^{-L}, X^{-L+1}, ..."""
        K = len(coeffs) - L if K is None else K
        scal = [c if isinstance(c, PadicScalar) else PadicScalar.from_rational(F, c) for c in coeffs]
        scal = [x.with_field(F) if x.F != F else x for x in scal]
        s = max((x.s for x in scal), default=0)
        p = F.p
        comps = [[0] * len(scal) for _ in range(F.d)]
        pr = F.N if prec is None else prec
        for m, x in enumerate(scal):
            if x.exact_zero:
                continue
            pr = min(pr, x.prec)
            sc = p ** (s - x.s)
            for i in range(F.d):
                comps[i][m] = x.c[i] * sc
        return cls(F, comps, s, pr, L, K)

    @classmethod
    def zero(cls, F: FieldDesc, K: int) -> "TruncSeries":
        return cls(F, [[0] * K], 0, None, 0, K)

    @classmethod
    def one(cls, F: FieldDesc, K: int) -> "TruncSeries":
        return cls.monomial(F, 0, K)

    @classmethod
    def monomial(cls, F: FieldDesc, m: int, K: int, coeff: int = 1) -> "TruncSeries":
        L = max(0, -m)
        comp = [0] * (L + K)
        if m < K:
            comp[m + L] = coeff
        return cls(F, [comp], 0, None, L, K)

    @classmethod
    def X(cls, F: FieldDesc, K: int) -> "TruncSeries":
        return cls.monomial(F, 1, K)

    @classmethod
    def const(cls, F: FieldDesc, a, K: int) -> "TruncSeries":
        return cls.from_list(F, [a], K)

    # -- inspection -----------------------------------------------------
    def coeff(self, m: int) -> PadicScalar:
        if m < -self.L or m >= self.K:
            if m >= self.K:
                raise IndexError(f"exponent {m} beyond cap {self.K}")
            return PadicScalar(self.F, [0] * self.F.d, 0, self.prec)
        idx = m + self.L
        return PadicScalar(self.F, [comp[idx] for comp in self.c], self.s, self.prec)

    def coeffs(self) -> list:
        return [self.coeff(m) for m in range(-self.L, self.K)]

    def val(self):
        """Minimal coefficient valuation (``inf`` if zero at precision)."""
        p, e = self.F.p, self.F.e
        best = INF
        for i, comp in enumerate(self.c):
            g = math.gcd(*comp) if comp else 0
            if g:
                v = vp(g, p) if e == 1 else Fraction(vp(g, p)) + Fraction(i, e)
                best = min(best, v)
        if best == INF:
            return INF
        v = best - self.s
        return int(v) if isinstance(v, Fraction) and v.denominator == 1 else v

    def floor_val(self) -> int:
        v = self.val()
        return self.prec if v == INF else math.floor(v)

    def is_zero(self) -> bool:
        return all(not any(comp) for comp in self.c)

    def order(self):
        """Lowest exponent with a nonzero coefficient (``inf`` for zero)."""
        for idx in range(self.L + self.K):
            if any(comp[idx] for comp in self.c):
                return idx - self.L
        return INF

    def degree(self) -> int:
        for idx in range(self.L + self.K - 1, -1, -1):
            if any(comp[idx] for comp in self.c):
                return idx - self.L
        return -1 - self.L

    def __len__(self):
        return self.L + self.K

    # -- reshaping ------------------------------------------------------
    def _reshape(self, L: int, K: int, s: int) -> list:
        """Components with given pole room, cap and shift (s >= self.s)."""
        sc = self.F.p ** (s - self.s)
        out = []
        for comp in self.c:
            new = [0] * (L + K)
            off = L - self.L
            for idx, x in enumerate(comp):
                j = idx + off
                if 0 <= j < L + K and x:
                    new[j] = x * sc
            out.append(new)
        return out

    def truncate(self, K: int) -> "TruncSeries":
        K = min(K, self.K)
        return TruncSeries(self.F, [comp[:self.L + K] for comp in self.c], self.s, self.prec, self.L, K,
                           min(self.rel, K))

    def with_caps(self, K: int | None = None, rel: int | None = None, prec: int | None = None) -> "TruncSeries":
        K = self.K if K is None else K
        if K > self.K:
            comps = self._reshape(self.L, K, self.s)
            rel = self.rel if rel is None else rel
        else:
            comps = [comp[:self.L + K] for comp in self.c]
        r = min(self.rel if rel is None else rel, K)
        pr = self.prec if prec is None else min(prec, self.prec)
        return TruncSeries(self.F, comps, self.s, pr, self.L, K, r)

    def extend(self, K: int) -> "TruncSeries":
        """Pad a polynomial representative with zeros up to cap K."""
        comps = self._reshape(self.L, K, self.s)
        return TruncSeries(self.F, comps, self.s, self.prec, self.L, K, self.rel if K >= self.K else K)

    def with_field(self, F: FieldDesc) -> "TruncSeries":
        return TruncSeries(F, self.c, self.s, min(self.prec, F.N), self.L, self.K, self.rel)

    def shift(self, m: int) -> "TruncSeries":
        """Multiplication by X^m (exact, caps move with the series)."""
        L = self.L - m
        if L >= 0:
            return TruncSeries(self.F, self.c, self.s, self.prec, L, self.K + m, self.rel + m)
        pad = [0] * (-L)
        return TruncSeries(self.F, [pad + list(comp) for comp in self.c], self.s, self.prec, 0,
                           self.K + m, self.rel + m)

    # -- ring operations ----------------------------------------------
    def _coerce(self, other) -> "TruncSeries":
        if isinstance(other, TruncSeries):
            if other.F != self.F:
                if other.F.p == self.F.p and other.F.g == self.F.g:
                    return other.with_field(self.F)
                raise ValueError("series from different fields")
            return other
        return TruncSeries.const(self.F, other, self.K)

    def __add__(self, other):
        if isinstance(other, (int, Fraction, PadicScalar)) and not isinstance(other, bool):
            return self + TruncSeries.const(self.F, other, self.K).with_caps(rel=self.K)
        o = self._coerce(other)
        L, K = max(self.L, o.L), min(self.K, o.K)
        s = max(self.s, o.s)
        a, b = self._reshape(L, K, s), o._reshape(L, K, s)
        comps = [[x + y for x, y in zip(ca, cb)] for ca, cb in zip(a, b)]
        return TruncSeries(self.F, comps, s, min(self.prec, o.prec), L, K, min(self.rel, o.rel))

    __radd__ = __add__

    def __neg__(self):
        return TruncSeries(self.F, [[-x for x in comp] for comp in self.c], self.s, self.prec, self.L,
                           self.K, self.rel)

    def __sub__(self, other):
        return self + (-self._coerce(other) if isinstance(other, TruncSeries) else -PadicScalar.from_rational(
            self.F, other) if not isinstance(other, PadicScalar) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, a) -> "TruncSeries":
        F = self.F
        if isinstance(a, int) and not isinstance(a, bool):
            if a == 0:
                return TruncSeries(F, [[0] * len(self)], 0, self.prec, self.L, self.K, self.rel)
            return TruncSeries(F, [[x * a for x in comp] for comp in self.c], self.s,
                               self.prec + vp(a, F.p), self.L, self.K, self.rel)
        if not isinstance(a, PadicScalar):
            a = PadicScalar.from_rational(F, a)
        elif a.F != F:
            a = a.with_field(F)
        if a.exact_zero:
            return TruncSeries(F, [[0] * len(self)], 0, self.prec, self.L, self.K, self.rel)
        prec = min(self.prec + a.floor_val(), a.prec + self.floor_val())
        d = F.d
        if d == 1:
            comps = [[x * a.c[0] for x in self.c[0]]]
        else:
            n = len(self)
            acc = [[0] * n for _ in range(2 * d - 1)]
            for i, ai in enumerate(a.c):
                if ai:
                    for j, comp in enumerate(self.c):
                        tgt = acc[i + j]
                        for m, x in enumerate(comp):
                            if x:
                                tgt[m] += ai * x
            comps = _reduce_components(F, acc)
        return TruncSeries(F, comps, self.s + a.s, prec, self.L, self.K, self.rel)

    def __mul__(self, other):
        if not isinstance(other, TruncSeries):
            return self.scale(other)
        o = self._coerce(other)
        F = self.F
        K = min(self.K - o.L, o.K - self.L)
        rel = min(self.rel - o.L, o.rel - self.L)
        L = self.L + o.L
        n = L + K
        if n <= 0:
            raise PrecisionExhausted("product has no reliable coefficients")
        prec = min(self.prec + o.floor_val(), o.prec + self.floor_val())
        d = F.d
        if d == 1:
            comps = [_conv(self.c[0], o.c[0], n)]
        else:
            acc = [[0] * n for _ in range(2 * d - 1)]
            for i, ca in enumerate(self.c):
                if not any(ca):
                    continue
                for j, cb in enumerate(o.c):
                    if not any(cb):
                        continue
                    prod = _conv(ca, cb, n)
                    tgt = acc[i + j]
                    for m in range(n):
                        tgt[m] += prod[m]
            comps = _reduce_components(F, acc)
        return TruncSeries(F, comps, self.s + o.s, prec, L, K, rel)

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, n: int) -> "TruncSeries":
        if n < 0:
            return self.inverse() ** (-n)
        result = TruncSeries.one(self.F, self.K).with_caps(rel=self.rel)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def inverse(self) -> "TruncSeries":
        """Inverse in the Laurent ring: X^{-v} times the inverse of the unit part."""
        v = self.order()
        if v == INF:
            raise DivisionByPrecisionZero("series is zero at precision")
        f = self.shift(-v) if v else self
        c0 = f.coeff(0)
        if c0.is_zero():
            raise DivisionByPrecisionZero("constant term is zero at precision")
        if f.L:
            f = TruncSeries(f.F, [comp[f.L:] for comp in f.c], f.s, f.prec, 0, f.K, f.rel)
        h = TruncSeries.const(f.F, c0.inverse(), 1)
        k = 1
        while k < f.K:
            k = min(2 * k, f.K)
            fk = f.truncate(k)
            hk = h.extend(k)
            e = TruncSeries.one(f.F, k) - fk * hk
            h = hk + hk * e
        h = h.with_caps(rel=f.rel)
        return h.shift(-v) if v else h

    def __truediv__(self, other):
        if isinstance(other, TruncSeries):
            return self * other.inverse()
        if not isinstance(other, PadicScalar):
            other = PadicScalar.from_rational(self.F, other)
        return self.scale(other.inverse())

    def deriv(self) -> "TruncSeries":
        """d/dX of the representative."""
        comps = []
        for comp in self.c:
            new = [0] * len(comp)
            for idx, x in enumerate(comp):
                m = idx - self.L
                if idx >= 1:
                    new[idx - 1] = x * m
            comps.append(new)
        return TruncSeries(self.F, comps, self.s, self.prec, self.L + 1 if self.L else 0,
                           self.K - 1, self.rel - 1) if self.L else TruncSeries(
            self.F, [comp[1:] for comp in comps], self.s, self.prec, 0, self.K - 1, self.rel - 1)

    # -- comparison -------------------------------------------------------
    def agrees(self, other, prec: int | None = None, K: int | None = None) -> bool:
        """Equality of representatives modulo (p^prec, X^K); defaults use the caps."""
        o = self._coerce(other)
        K = min(self.rel, o.rel) if K is None else K
        prec = min(self.prec, o.prec) if prec is None else prec
        diff = (self - o)
        return diff.val_below(K) >= prec

    def val_below(self, K: int):
        """Minimal coefficient valuation among exponents < K."""
        idx = self.L + min(K, self.K)
        part = TruncSeries(self.F, [comp[:idx] for comp in self.c], self.s, self.prec, self.L, idx - self.L)
        v = part.val()
        return part.prec if v == INF else v

    def __eq__(self, other):
        try:
            return self.agrees(other)
        except (TypeError, ValueError):
            return NotImplemented

    __hash__ = None

    # -- operators as methods -----------------------------------------
    def phi(self):
        return frobenius(self)

    def gamma(self, a):
        return gamma_subst(self, a)

    def psi(self):
        return psi(self)

    def __call__(self, m: int) -> PadicScalar:
        return self.coeff(m)

    def __str__(self):
        F = self.F
        ext = "none" if F.g is None else F.relation()
        lines = [f"series{{ p={F.p}, N={self.prec}, K={self.K}, L={self.L}, ext={ext} }}"]
        for m in range(-self.L, self.K):
            x = self.coeff(m)
            if not x.is_zero():
                lines.append(f"{m}: {x}")
        lines.append("}")
        return "\n".join(lines)

    __repr__ = __str__


def _reduce_components(F: FieldDesc, acc: list) -> list:
    d, g = F.d, F.g
    for k in range(2 * d - 2, d - 1, -1):
        top = acc[k]
        if not any(top):
            continue
        base = k - d
        for i in range(d):
            gi = g[i]
            if gi:
                tgt = acc[base + i]
                for m, x in enumerate(top):
                    if x:
                        tgt[m] -= gi * x
    return acc[:d]


def parse_series(text: str, F: FieldDesc) -> TruncSeries:
    from .padic import parse_scalar
    lines = [ln.strip() for ln in text.strip().splitlines()]
    head = lines[0]
    fields = dict(part.split("=", 1) for part in head[head.index("{") + 1:head.rindex("}")].replace(" ", "").split(",")
                  if "=" in part and not part.startswith("ext"))
    K, L, N = int(fields["K"]), int(fields["L"]), int(fields["N"])
    coeffs = [PadicScalar.zero(F)] * (L + K)
    for ln in lines[1:-1]:
        m, _, rest = ln.partition(": ")
        coeffs[int(m) + L] = parse_scalar(rest, F)
    return TruncSeries.from_list(F, coeffs, K, L, prec=N)


# -- operator matrices --------------------------------------------------

def _poly_powers(base: Sequence[int], K: int) -> list:
    """Rows [X^j] base^n for n < K, truncated at X^K (base has zero constant term)."""
    rows = [[1] + [0] * (K - 1)]
    cur = rows[0]
    for _ in range(1, K):
        nxt = [0] * K
        for i, x in enumerate(cur):
            if x:
                for j, b in enumerate(base):
                    if i + j >= K:
                        break
                    if b:
                        nxt[i + j] += x * b
        rows.append(nxt)
        cur = nxt
    return rows


def _columns(rows: list, K: int) -> tuple:
    cols = []
    for j in range(K):
        col = [row[j] for row in rows[: j + 1]] if rows else []
        cols.append(tuple(col))
    return tuple(cols)


@lru_cache(maxsize=64)
def phi_columns(p: int, K: int) -> tuple:
    base = [math.comb(p, i) for i in range(p + 1)]
    base[0] = 0
    return _columns(_poly_powers(base, K), K)


@lru_cache(maxsize=64)
def gamma_columns(a: int, K: int) -> tuple:
    if a >= 0:
        base = [math.comb(a, i) for i in range(min(a, K) + 1)]
    else:
        base = [_gbinom(a, i) for i in range(K)]
    base[0] = 0
    return _columns(_poly_powers(base, K), K)


def _gbinom(a: int, i: int) -> int:
    num = 1
    for t in range(i):
        num *= a - t
    return num // math.factorial(i)


@lru_cache(maxsize=64)
def psi_rows(p: int, K: int) -> tuple:
    """Row n lists [X^i] psi(X^n) for i <= n // p."""
    # psi(X^n) = sum_j C(n, pj) (-1)^(n-pj) (1+X)^j
    rows = []
    for n in range(K):
        top = n // p
        row = [0] * (top + 1)
        for j in range(top + 1):
            c = math.comb(n, p * j) * (-1) ** (n - p * j)
            if c:
                for i in range(j + 1):
                    row[i] += c * math.comb(j, i)
        rows.append(tuple(row))
    return tuple(rows)


def _apply_cols(vec: Sequence[int], cols: tuple, K: int) -> list:
    return [sum(map(int.__mul__, vec, cols[j])) if cols[j] else 0 for j in range(K)]


# -- operators -------------------------------------------------------------

def frobenius(f: TruncSeries, full: bool = False) -> TruncSeries:
    """X -> (1+X)^p - 1 on the representative, truncated at K.

    With ``full=True`` the polynomial image is kept untruncated.
    """
    if f.L:
        raise NonInvertiblePole("phi of a pole needs q-inversion; premultiply by q^L first")
    p = f.F.p
    K = f.K
    Kout = p * (K - 1) + 1 if full else K
    cols = phi_columns(p, Kout)
    comps = []
    for comp in f.c:
        v = list(comp) + [0] * (Kout - len(comp))
        comps.append(_apply_cols(v, cols, Kout))
    rel = f.rel if not full else p * (f.rel - 1) + 1
    return TruncSeries(f.F, comps, f.s, f.prec, 0, Kout, rel)


def _gamma_exponent(a) -> tuple:
    """Integer representative of the exponent and the precision it costs."""
    if isinstance(a, int):
        return a, None
    if isinstance(a, Fraction):
        raise TypeError("gamma needs an integer or a p-adic unit")
    if a.F.d != 1 or a.s or a.val() != 0:
        raise ValueError("gamma_a needs a unit of Z_p")
    return a.c[0], a.prec


def gamma_subst(f: TruncSeries, a) -> TruncSeries:
    """X -> (1+X)^a - 1 for a unit a of Z_p (poles through u = gamma(X)/X)."""
    A, aprec = _gamma_exponent(a)
    F, K, p = f.F, f.K, f.F.p
    if A % p == 0:
        raise ValueError("gamma_a needs a p-adic unit")
    prec = f.prec
    if aprec is not None:
        # Vandermonde: C(p^m t, i) has valuation >= m - v_p(i)
        loss = int(math.floor(math.log(K - 1, p))) if K > 1 else 0
        prec = min(prec, aprec - loss)
        if prec <= 0:
            raise PrecisionExhausted("exponent precision exhausted by gamma")
    L = f.L
    if L == 0:
        cols = gamma_columns(A, K)
        comps = [_apply_cols(comp, cols, K) for comp in f.c]
        return TruncSeries(F, comps, f.s, prec, 0, K, f.rel)
    # f = X^{-L} g with g a polynomial representative of length L+K
    g = TruncSeries(F, f.c, f.s, f.prec, 0, L + K, f.rel + L)
    cols = gamma_columns(A, L + K)
    gg = TruncSeries(F, [_apply_cols(comp, cols, L + K) for comp in g.c], g.s, prec, 0, L + K, g.rel)
    u = gamma_unit(F, A, L + K)
    out = gg * (u.inverse() ** L)
    return out.shift(-L)


def gamma_unit(F: FieldDesc, a: int, K: int) -> TruncSeries:
    """u = ((1+X)^a - 1)/X, a unit when p does not divide a."""
    if a >= 0:
        coeffs = [math.comb(a, m + 1) for m in range(K)]
    else:
        coeffs = [_gbinom(a, m + 1) for m in range(K)]
    return TruncSeries(F, [coeffs], 0, None, 0, K)


def psi(f: TruncSeries) -> TruncSeries:
    """Left inverse of phi, exact on the representative.

    Poles are handled through psi(X^{-l} h) = X^{-l} psi(q^l h).
    """
    F, p = f.F, f.F.p
    L = f.L
    if L:
        g = TruncSeries(F, f.c, f.s, f.prec, 0, L + f.K, f.rel + L)
        qL = q_elem(F, L + f.K) ** L
        g = _poly_mul_full(g, qL)
        out = psi(g)
        # q^L h is a polynomial of degree < L + K + L(p-1): psi lowers it below (that)/p
        return TruncSeries(out.F, out.c, out.s, out.prec, 0, out.K, out.rel).shift(-L).truncate(f.K)
    K = f.K
    rows = psi_rows(p, K)
    comps = []
    for comp in f.c:
        out = [0] * K
        for n, x in enumerate(comp):
            if x:
                for i, r in enumerate(rows[n]):
                    if r:
                        out[i] += x * r
        comps.append(out)
    rel = (f.rel - 1) // p + 1 if f.rel > 0 else 0
    return TruncSeries(F, comps, f.s, f.prec, 0, K, rel)


def _poly_mul_full(g: TruncSeries, h: TruncSeries) -> TruncSeries:
    """Untruncated product of two pole-free polynomial representatives."""
    n = g.degree() + h.degree() + 1
    n = max(n, 1)
    a = g.extend(max(n, g.K))
    b = h.extend(max(n, h.K))
    out = a * b
    return out.with_caps(rel=min(g.rel, h.rel))


# -- distinguished elements ----------------------------------------------

def q_elem(F: FieldDesc, K: int) -> TruncSeries:
    """q = phi(X)/X = ((1+X)^p - 1)/X."""
    p = F.p
    coeffs = [math.comb(p, m + 1) for m in range(min(p, K))]
    return TruncSeries(F, [coeffs + [0] * (K - len(coeffs))], 0, None, 0, K)


def t_trunc(F: FieldDesc, K: int) -> TruncSeries:
    """log(1+X) truncated at X^K."""
    p = F.p
    if K >= p ** F.N:
        raise PrecisionExhausted("1/n underflows the precision cap")
    s = int(math.floor(math.log(K - 1, p) + 1e-12)) if K > 1 else 0
    while p ** (s + 1) <= K - 1:
        s += 1
    while s and p ** s > K - 1:
        s -= 1
    M = p ** (F.N + s)
    coeffs = [0]
    for n in range(1, K):
        v = vp(n, p)
        u = n // p ** v
        coeffs.append((-1) ** (n + 1) * p ** (s - v) * pow(u, -1, M))
    return TruncSeries(F, [coeffs], s, None, 0, K)


def log_pm(sign: int, F: FieldDesc, K: int, n_factors: int | None = None) -> TruncSeries:
    """log^+ = prod_{n>=0} phi^{2n+1}(q)/p (sign=+1) or log^- = prod phi^{2n}(q)/p.

    Without ``n_factors`` the product runs until a factor is 1 modulo
    (p^N, X^K), which takes about N + log_p K factors.
    """
    p = F.p
    fac = TruncSeries.from_list(F, [Fraction(math.comb(p, m + 1), p) for m in range(min(p, K))]).extend(K)
    m = 0
    acc = TruncSeries.one(F, K)
    used = 0
    start = 1 if sign > 0 else 0
    limit = None if n_factors is None else n_factors
    while True:
        if m >= start and (m - start) % 2 == 0:
            if limit is not None and used >= limit:
                break
            if limit is None and (fac - 1).val_below(K) >= fac.prec:
                break
            acc = acc * fac
            used += 1
        fac = frobenius(fac)
        m += 1
        if m > 4 * (F.N + K):
            raise PrecisionExhausted("log^± factors do not converge")
    return acc


# -- psi resolvent --------------------------------------------------------

def psi_resolvent(x, alpha, apply_psi: Callable | None = None, apply_phi: Callable | None = None,
                  max_terms: int = 10_000):
    """Solve (psi - alpha) y = x.

    alpha = 0: y = phi(x).  val(alpha) < 0: Neumann series in alpha^{-1} psi.
    val(alpha) > 0: y = (1 - alpha phi)^{-1} phi(x).
    """
    apply_psi = apply_psi or psi
    apply_phi = apply_phi or frobenius
    F = _field_of(x)
    a = alpha if isinstance(alpha, PadicScalar) else PadicScalar.from_rational(F, alpha)
    if a.exact_zero or a.is_zero():
        return apply_phi(x)
    v = a.val()
    if v == 0:
        raise UnsupportedCase("val(alpha)=0 requires D/(1-psi)=0, not handled")
    if v < 0:
        ainv = a.inverse()
        term = x
        total = x
        for _ in range(max_terms):
            term = _scale(apply_psi(term), ainv)
            if _is_zero(term):
                break
            total = _add(total, term)
        return _scale(total, -ainv)
    term = apply_phi(x)
    total = term
    for _ in range(max_terms):
        term = _scale(apply_phi(term), a)
        if _is_zero(term):
            break
        total = _add(total, term)
    return total


def _field_of(x):
    if isinstance(x, TruncSeries):
        return x.F
    return _field_of(x[0])


def _scale(x, a):
    if isinstance(x, TruncSeries):
        return x.scale(a)
    return [_scale(t, a) for t in x]


def _add(x, y):
    if isinstance(x, TruncSeries):
        return x + y
    return [_add(s, t) for s, t in zip(x, y)]


def _is_zero(x):
    if isinstance(x, TruncSeries):
        return x.is_zero()
    return all(_is_zero(t) for t in x)
