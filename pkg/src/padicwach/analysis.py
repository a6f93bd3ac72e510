"""Mahler expansions, tempered distributions and their moments.

A distribution on Z_p is handled through its Mahler data
``c_n = mu(binom(z, n))`` (equivalently the Amice series ``sum c_n X^n``)
or through a table of moments ``int_{a+p^n Z_p} (z-a)^j mu``.  Everything
is truncated, so norms and order claims are finite-range certificates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

from .errors import ConditionViolated, NoConvergence, PrecisionExhausted, UnsupportedInput
from .padic import INF, FieldDesc, PadicScalar, vp, vp_factorial, vp_rational
from .series import TruncSeries, psi as series_psi


def _v(x, p: int):
    if isinstance(x, PadicScalar):
        return x.val()
    return vp_rational(Fraction(x), p)


def _scalar(F: FieldDesc, x) -> PadicScalar:
    if isinstance(x, PadicScalar):
        return x if x.F == F else x.with_field(F)
    return PadicScalar.from_rational(F, x)


def log_p(x: float, p: int) -> float:
    return math.log(x) / math.log(p)


# -- norms ------------------------------------------------------------------

@dataclass(frozen=True)
class NormValue:
    """A norm stored as ``p^exponent``; ``exponent = -inf`` is the zero norm.

    ``argmax`` is the index realising the sup and ``finite_range`` is
    always set: the sup is over the available coefficients only.
    """
    p: int
    exponent: float
    argmax: int | tuple | None = None
    finite_range: bool = True

    @property
    def value(self) -> float:
        return 0.0 if self.exponent == -INF else float(self.p) ** self.exponent

    def __le__(self, other: "NormValue") -> bool:
        return self.exponent <= other.exponent + 1e-12

    def __str__(self):
        return f"p^{float(self.exponent):g} (finite range)"


def _sup(p: int, items: Iterable[tuple]) -> NormValue:
    best, arg = -INF, None
    for idx, e in items:
        if e > best + 1e-12:
            best, arg = e, idx
    if isinstance(best, float) and best.is_integer():
        best = int(best)
    return NormValue(p, best, arg)


def _log_term(r, n: int, p: int):
    """r * log_p(n), exact when it is rational."""
    if r == 0 or n == 1:
        return 0
    v = vp(n, p)
    if p ** v == n:
        return Fraction(r) * v
    return float(r) * log_p(n, p)


# -- Mahler functions and distributions --------------------------------------

def _binom_val(z: int, n: int) -> int:
    return math.comb(z, n) if z >= 0 else (-1) ** n * math.comb(n - z - 1, n)


@dataclass(frozen=True)
class MahlerFunction:
    a: tuple
    p: int
    claimed_r: Fraction | None = None

    @property
    def M(self) -> int:
        return len(self.a)

    def __call__(self, z: int):
        return sum((c * _binom_val(z, n) for n, c in enumerate(self.a) if c), 0 * self.a[0])

    def certify(self) -> bool:
        """(n+1)^r |a_n| never climbs above its running maximum by more than the floor.

        On truncated data this only says the available coefficients are
        compatible with the claim: it is a finite-order certificate.
        """
        if self.claimed_r is None:
            return True
        first = cr_norm(MahlerFunction(self.a[:1], self.p), self.claimed_r)
        full = cr_norm(self, self.claimed_r)
        return full.exponent <= max(first.exponent, 0) + 1e-12


def mahler_coeffs(values: Sequence, p: int, claimed_r=None) -> MahlerFunction:
    """a_n = sum_i (-1)^i C(n, i) f(n - i), computed by iterated differences."""
    row = list(values)
    out = []
    while row:
        out.append(row[0])
        row = [y - x for x, y in zip(row, row[1:])]
    return MahlerFunction(tuple(out), p, None if claimed_r is None else Fraction(claimed_r))


def mahler_eval(coeffs: Sequence, z: int):
    return sum(c * _binom_val(z, n) for n, c in enumerate(coeffs))


@dataclass(frozen=True)
class MahlerDistribution:
    """c_n = mu(binom(z, n)) for n < M, over the field ``F``.

    ``exact`` means c_n = 0 for every n >= M (a finite combination of
    Dirac masses at 0..M-1); otherwise the tail is unknown.
    """
    F: FieldDesc
    c: tuple
    claimed_r: Fraction | None = None
    exact: bool = False

    @property
    def M(self) -> int:
        return len(self.c)

    @classmethod
    def from_coeffs(cls, F: FieldDesc, coeffs: Sequence, claimed_r=None, exact: bool = False):
        r = None if claimed_r is None else Fraction(claimed_r)
        return cls(F, tuple(_scalar(F, x) for x in coeffs), r, exact)

    @classmethod
    def dirac(cls, F: FieldDesc, a: int, M: int) -> "MahlerDistribution":
        if not 0 <= a < M:
            raise ValueError("Dirac point must lie in 0..M-1 for an exact truncation")
        return cls.from_coeffs(F, [math.comb(a, n) for n in range(M)], exact=True)

    @classmethod
    def dirac_combo(cls, F: FieldDesc, weights: Mapping[int, object], M: int) -> "MahlerDistribution":
        c = [PadicScalar.zero(F)] * M
        for a, w in weights.items():
            if not 0 <= a < M:
                raise ValueError("Dirac point must lie in 0..M-1 for an exact truncation")
            ws = _scalar(F, w)
            for n in range(a + 1):
                c[n] = c[n] + ws * math.comb(a, n)
        return cls(F, tuple(c), None, True)

    def amice(self) -> TruncSeries:
        return TruncSeries.from_list(self.F, list(self.c), K=self.M)

    def with_field(self, F: FieldDesc) -> "MahlerDistribution":
        return MahlerDistribution(F, tuple(_scalar(F, x) for x in self.c), self.claimed_r, self.exact)

    def __add__(self, other: "MahlerDistribution") -> "MahlerDistribution":
        M = min(self.M, other.M)
        return MahlerDistribution(self.F, tuple(x + y for x, y in zip(self.c[:M], other.c[:M])),
                                  self.claimed_r, self.exact and other.exact)

    def scale(self, s) -> "MahlerDistribution":
        s = _scalar(self.F, s)
        return MahlerDistribution(self.F, tuple(x * s for x in self.c), self.claimed_r, self.exact)

    def integrate_poly(self, coeffs: Sequence) -> PadicScalar:
        """int f mu for f a polynomial given by Mahler coefficients."""
        acc = PadicScalar.zero(self.F)
        for a, c in zip(coeffs, self.c):
            if a:
                acc = acc + c * _scalar(self.F, a)
        return acc


def amice_inverse(w: TruncSeries, claimed_r=None, exact: bool = False) -> MahlerDistribution:
    if w.L:
        raise UnsupportedInput("an Amice transform has no poles")
    return MahlerDistribution.from_coeffs(w.F, w.coeffs(), claimed_r, exact)


def cr_norm(f: MahlerFunction, r) -> NormValue:
    """sup_n (n+1)^r |a_n(f)| over the stored coefficients."""
    p = f.p
    return _sup(p, ((n, _log_term(r, n + 1, p) - _v(a, p)) for n, a in enumerate(f.a) if _v(a, p) != INF))


def order_norm(w, r) -> NormValue:
    """sup_n (n+1)^{-r} |a_n| for an Amice series or Mahler distribution."""
    coeffs = w.c if isinstance(w, MahlerDistribution) else w.coeffs()
    p = (w.F.p)
    return _sup(p, ((n, -_log_term(r, n + 1, p) - _v(a, p)) for n, a in enumerate(coeffs) if _v(a, p) != INF))


def factorial_norm(w, r) -> NormValue:
    """sup_n p^{-nr} sup_m |a_m * floor(m/p^n)!| over the stored range."""
    coeffs = w.c if isinstance(w, MahlerDistribution) else w.coeffs()
    p = w.F.p
    M = len(coeffs)
    top = 0
    while p ** top <= M:
        top += 1
    items = []
    for n in range(top + 1):
        for m, a in enumerate(coeffs):
            v = _v(a, p)
            if v != INF:
                items.append(((n, m), -Fraction(r) * n - v - vp_factorial(m // p ** n, p)))
    return _sup(p, items)


# -- psi ----------------------------------------------------------------------

@lru_cache(maxsize=32)
def _psi_kernel(p: int, M: int) -> tuple:
    """Row n: Mahler coefficients of 1_{pZ_p}(z) binom(z/p, n) on 0..M-1."""
    rows = []
    for n in range(M):
        vals = [math.comb(z // p, n) if z % p == 0 else 0 for z in range(M)]
        rows.append(mahler_coeffs(vals, p).a)
    return tuple(rows)


def psi_dist(mu: MahlerDistribution) -> MahlerDistribution:
    """int f psi(mu) = int_{pZ_p} f(z/p) mu, computed on the Amice side."""
    out = series_psi(mu.amice())
    return MahlerDistribution(mu.F, tuple(out.coeffs()[:mu.M]), mu.claimed_r, mu.exact)


def psi_dist_moments(mu: MahlerDistribution) -> MahlerDistribution:
    """Same operator from the definition: pair mu with the expansion of 1_{pZ_p} binom(z/p, n).

    Exact when ``mu.exact`` holds, since then only the first M Mahler
    coefficients of the test function matter.
    """
    K = _psi_kernel(mu.F.p, mu.M)
    return MahlerDistribution(mu.F, tuple(mu.integrate_poly(row) for row in K), mu.claimed_r, mu.exact)


# -- moment tables ------------------------------------------------------------

Ball = tuple  # (a, n) with 0 <= a < p^n


@dataclass
class MomentTable:
    """Moments ``int_{a+p^n Z_p} (z-a)^j mu`` for n <= depth and j <= d.

    ``source`` (optional) supplies missing entries in closed form and
    ``empty`` (optional) reports balls known to carry no mass.
    """
    F: FieldDesc
    d: int
    depth: int
    r: Fraction
    data: dict = field(default_factory=dict)
    source: Callable | None = None
    empty: Callable | None = None
    vC: Fraction | None = None

    @property
    def p(self) -> int:
        return self.F.p

    def get(self, a: int, n: int, j: int) -> PadicScalar:
        a %= self.p ** n
        key = (a, n, j)
        if key in self.data:
            return self.data[key]
        if self.empty is not None and self.empty(a, n):
            return PadicScalar.zero(self.F)
        if self.source is not None:
            return self.source(a, n, j)
        raise KeyError(f"moment {key} not available")

    def balls(self, n: int) -> Iterable[int]:
        for a in range(self.p ** n):
            if self.empty is None or not self.empty(a, n):
                yield a

    def constant(self) -> Fraction:
        """v(C_mu): the least v(moment) - n(j - r) over the stored range."""
        if self.vC is not None:
            return self.vC
        best = None
        for n in range(self.depth + 1):
            for a in self.balls(n):
                for j in range(self.d + 1):
                    v = self.get(a, n, j).val()
                    if v != INF:
                        e = v - n * (j - self.r)
                        best = e if best is None else min(best, e)
        return Fraction(0) if best is None else Fraction(best)

    def check_condition(self, vC) -> list:
        """Entries violating v(moment) >= vC + n(j - r)."""
        bad = []
        for n in range(self.depth + 1):
            for a in self.balls(n):
                for j in range(self.d + 1):
                    v = self.get(a, n, j).val()
                    if v != INF and v < vC + n * (j - self.r):
                        bad.append((a, n, j))
        return bad

    def check_additivity(self) -> bool:
        p = self.p
        for n in range(self.depth):
            for a in self.balls(n):
                for j in range(self.d + 1):
                    acc = PadicScalar.zero(self.F)
                    for t in range(p):
                        b = a + t * p ** n
                        for i in range(j + 1):
                            acc = acc + self.get(b, n + 1, i) * (math.comb(j, i) * (b - a) ** (j - i))
                    if not (acc - self.get(a, n, j)).is_zero():
                        return False
        return True

    def to_text(self) -> str:
        lines = []
        for (a, n, j) in sorted(self.data, key=lambda t: (t[1], t[0], t[2])):
            lines.append(f"{a} {n} {j} : {self.data[(a, n, j)]}")
        return "\n".join(lines)


def dirac_table(F: FieldDesc, weights: Mapping[int, object], d: int, depth: int, r) -> MomentTable:
    """Closed-form moments of sum w_x delta_x (integer points x)."""
    p = F.p
    pts = {x: _scalar(F, w) for x, w in weights.items()}

    def source(a, n, j):
        acc = PadicScalar.zero(F)
        for x, w in pts.items():
            if (x - a) % p ** n == 0:
                acc = acc + w * ((x - a) ** j)
        return acc

    def empty(a, n):
        return all((x - a) % p ** n for x in pts)

    return MomentTable(F, d, depth, Fraction(r), source=source, empty=empty)


def moment_norm(T: MomentTable, r, jmax: int | None = None) -> NormValue:
    """sup p^{n(j-r)} |moment(a, n, j)|; ``jmax = k-2`` gives the restricted variant."""
    top = T.d if jmax is None else min(jmax, T.d)
    r = Fraction(r)
    items = []
    for n in range(T.depth + 1):
        for a in T.balls(n):
            for j in range(top + 1):
                v = T.get(a, n, j).val()
                if v != INF:
                    items.append(((a, n, j), n * (j - r) - v))
    return _sup(T.p, items)


def amice_velu_extend(T: MomentTable, target_j: int, target_depth: int, vC=None,
                      extra_levels: int = 0) -> MomentTable:
    """Unique tempered extension of a degree-d moment table to degree ``target_j``.

    Unknown moments are refined one level at a time:
    ``E(a,n,j) = sum_b sum_i C(j,i) (b-a)^{j-i} E(b,n+1,i)``,
    stored moments are used for i <= d and a ball of level n' contributes
    nothing once ``vC + n'(i - r) >= N`` (its bound is below precision).
    ``extra_levels`` pushes the cut-off further, to check independence.
    """
    F, p, d, r = T.F, T.p, T.d, T.r
    if d + 1 <= r:
        raise NoConvergence(f"degree bound d={d} must exceed r-1={r - 1}")
    if vC is None:
        vC = T.constant()
    else:
        bad = T.check_condition(Fraction(vC))
        if bad:
            raise ConditionViolated(f"moment bound fails at (a, n, j) = {bad[0]}")
    N = F.N
    memo: dict = {}

    def E(a: int, n: int, j: int) -> PadicScalar:
        if j <= d:
            return T.get(a, n, j)
        if T.empty is not None and T.empty(a % p ** n, n):
            return PadicScalar.zero(F)
        if vC + n * (j - r) >= N + (0 if extra_levels == 0 else extra_levels * (j - r)):
            return PadicScalar.zero(F)
        key = (a % p ** n, n, j)
        if key in memo:
            return memo[key]
        acc = PadicScalar.zero(F)
        for t in range(p):
            b = a + t * p ** n
            if T.empty is not None and T.empty(b % p ** (n + 1), n + 1):
                continue
            for i in range(j + 1):
                acc = acc + E(b, n + 1, i) * (math.comb(j, i) * (b - a) ** (j - i))
        memo[key] = acc
        return acc

    out = MomentTable(F, target_j, target_depth, r, {}, None, T.empty, T.vC)
    for n in range(target_depth + 1):
        for a in T.balls(n):
            for j in range(target_j + 1):
                out.data[(a, n, j)] = E(a, n, j)
    return out


# -- cyclotomic moments -----------------------------------------------------------

@lru_cache(maxsize=64)
def stirling2(j: int, i: int) -> int:
    if j == i:
        return 1
    if i == 0 or i > j:
        return 0
    return i * stirling2(j - 1, i) + stirling2(j - 1, i - 1)


def cyclotomic_field(p: int, N: int, m: int) -> FieldDesc:
    return FieldDesc.cyclotomic(p, N, m)


def _zeta_minus_one(F: FieldDesc) -> PadicScalar:
    # the model is Q_p[Y]/(Phi_{p^m}(1+Y)), so zeta - 1 = Y
    return PadicScalar.gen(F)


def zeta_tail_bound(mu: MahlerDistribution, j: int, m: int):
    """Lower bound for the valuation of the omitted terms i >= M."""
    p, M = mu.F.p, mu.M
    r = mu.claimed_r or Fraction(0)
    e = order_norm(mu, r)
    vC = -e.exponent if e.exponent != -INF else INF
    return Fraction(M - j, (p - 1) * p ** (m - 1)) - float(r) * log_p(M + 1, p) + vC


def zeta_binom_moment(mu: MahlerDistribution, j: int, m: int, F: FieldDesc | None = None) -> PadicScalar:
    """int binom(z, j) zeta^z mu = zeta^j sum_{i>=j} c_i C(i, j) (zeta-1)^{i-j}."""
    p = mu.F.p
    if F is None:
        F = mu.F if mu.F.kind == "cyclotomic" and mu.F.tag == m else FieldDesc.cyclotomic(p, mu.F.N, m)
    if not mu.exact:
        bound = zeta_tail_bound(mu, j, m)
        if bound < F.N:
            raise PrecisionExhausted(
                f"tail of the zeta sum is only known to be of valuation >= {float(bound):.3g} < {F.N}")
    Y = _zeta_minus_one(F)
    acc = PadicScalar.zero(F)
    pw = PadicScalar.from_rational(F, 1)
    for i in range(j, mu.M):
        c = mu.c[i]
        if not c.exact_zero:
            acc = acc + _scalar(F, c) * pw * math.comb(i, j)
        pw = pw * Y
    return acc * (Y + 1) ** j


def zeta_moment(mu: MahlerDistribution, j: int, m: int, F: FieldDesc | None = None) -> PadicScalar:
    """int z^j zeta^z mu, via z^j = sum_i S(j, i) i! binom(z, i)."""
    parts = [zeta_binom_moment(mu, i, m, F) for i in range(j + 1)]
    F = parts[0].F
    acc = PadicScalar.zero(F)
    for i in range(j + 1):
        s = stirling2(j, i) * math.factorial(i)
        if s:
            acc = acc + parts[i] * s
    return acc


@dataclass(frozen=True)
class Fil0Result:
    ok: bool
    residuals: tuple  # valuation of alpha^m Z_alpha(j) - beta^m Z_beta(j), j = 0..k-2
    threshold: int

    @property
    def min_residual(self):
        return min(self.residuals) if self.residuals else INF

    @property
    def first_failure(self):
        for j, v in enumerate(self.residuals):
            if v < self.threshold:
                return j
        return None


def check_fil0(mu_a: MahlerDistribution, mu_b: MahlerDistribution, alpha, beta, m: int, k: int,
               F: FieldDesc | None = None, threshold: int | None = None) -> Fil0Result:
    """alpha^m int z^j zeta^z mu_alpha = beta^m int z^j zeta^z mu_beta for j <= k-2.

    One primitive zeta (the generator 1 + Y of the model) is tested; the
    conjugate identities follow since the data is defined over Q_p(alpha).
    """
    if F is None:
        F = alpha.F if isinstance(alpha, PadicScalar) and alpha.F.kind == "cyclotomic" else \
            FieldDesc.cyclotomic(mu_a.F.p, mu_a.F.N, m)
    a, b = _scalar(F, alpha), _scalar(F, beta)
    thr = F.N if threshold is None else threshold
    res = []
    am, bm = a ** m, b ** m
    for j in range(k - 1):
        diff = am * zeta_moment(mu_a, j, m, F) - bm * zeta_moment(mu_b, j, m, F)
        res.append(diff.val())
    return Fil0Result(all(v >= thr for v in res), tuple(res), thr)


# -- derivatives and sections ------------------------------------------------------

def divided_difference(f: Callable, pts: Sequence):
    """f[x_0, ..., x_n] for distinct points."""
    vals = [Fraction(f(x)) for x in pts]
    pts = [Fraction(x) for x in pts]
    n = len(pts)
    for lev in range(1, n):
        vals = [(vals[i + 1] - vals[i]) / (pts[i + lev] - pts[i]) for i in range(n - lev)]
    return vals[0]


def finite_diff(f: Callable, n: int, grid: Sequence) -> dict:
    """Samples of f^{[n]} on all increasing (n+1)-tuples of distinct grid points."""
    from itertools import combinations
    return {pts: divided_difference(f, pts) for pts in combinations(sorted(set(grid)), n + 1)}


@dataclass(frozen=True)
class LocPoly:
    """A locally polynomial function on Z_p of level n.

    ``polys[b]`` lists the coefficients in (z - b) on the ball b + p^n Z_p,
    for 0 <= b < p^n; missing balls carry 0.
    """
    p: int
    n: int
    polys: dict

    def __call__(self, z: int) -> Fraction:
        b = z % self.p ** self.n
        cs = self.polys.get(b, ())
        return sum((Fraction(c) * (z - b) ** i for i, c in enumerate(cs)), Fraction(0))

    def deriv(self) -> "LocPoly":
        return LocPoly(self.p, self.n, {b: tuple(i * Fraction(c) for i, c in enumerate(cs))[1:]
                                        for b, cs in self.polys.items()})

    def degree(self) -> int:
        return max((len(cs) - 1 for cs in self.polys.values()), default=0)


def _poly_taylor(cs: Sequence, x0) -> list:
    """Coefficients of sum c_i (x0 + h)^i in powers of h."""
    out = [Fraction(0)] * len(cs)
    for i, c in enumerate(cs):
        for t in range(i + 1):
            out[t] += Fraction(c) * math.comb(i, t) * Fraction(x0) ** (i - t)
    return out


def _derivs_at(cs: Sequence, x0) -> list:
    """f^{(i)}(x0) for the polynomial sum c_i (z-b)^i, given x0 = z - b."""
    tay = _poly_taylor(cs, x0)
    return [t * math.factorial(i) for i, t in enumerate(tay)]


def _section_once(f: LocPoly) -> LocPoly:
    p, n = f.p, f.n
    out = {}
    for b in range(p ** n):
        cs = f.polys.get(b, ())
        # constant: digit sum over the coarse levels z_j -> z_{j+1}, j < n
        const = Fraction(0)
        for j in range(n):
            zj, zj1 = b % p ** j, b % p ** (j + 1)
            if zj == zj1:
                continue
            g = f.polys.get(zj % p ** n, ())
            ders = _derivs_at(g, zj - zj % p ** n)
            h = zj1 - zj
            for i, dv in enumerate(ders):
                const += dv / math.factorial(i + 1) * Fraction(h) ** (i + 1)
        # then the Taylor telescoping inside the ball is the antiderivative from b
        prim = [const] + [Fraction(c) / (i + 1) for i, c in enumerate(cs)]
        out[b] = tuple(prim)
    return LocPoly(p, n, out)


def deriv_section(f, n: int = 1) -> LocPoly:
    """The n-fold section P of differentiation: P(f)' = f on locally polynomial input."""
    if not isinstance(f, LocPoly):
        raise UnsupportedInput("deriv_section needs a LocPoly (finite ball decomposition)")
    for _ in range(n):
        f = _section_once(f)
    return f
