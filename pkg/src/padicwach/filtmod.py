"""Filtered phi-modules of dimension 1 and 2.

Filtration data: jumps ``h1 <= h2`` and a line ``delta`` with
``Fil^i = D`` for ``i <= h1``, ``Fil^i = E*delta`` for ``h1 < i <= h2`` and
``Fil^i = 0`` above.  In dimension 1 there is a single jump ``h``.
The matrix ``phi`` has the images of the basis vectors as columns.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import NonSemisimplePhi, NotAdmissible, WeightMismatch
from .padic import INF, FieldDesc, PadicScalar

ABS_IRRED = "absolutely-irreducible"
NONSPLIT = "reducible-nonsplit"
SPLIT = "reducible-split"


def _s(F: FieldDesc, x) -> PadicScalar:
    if isinstance(x, PadicScalar):
        return x.with_field(F) if x.F != F else x
    return PadicScalar.from_rational(F, x)


@dataclass(frozen=True)
class FilteredPhiModule:
    F: FieldDesc
    phi: tuple
    jumps: tuple
    delta: tuple | None = None
    # bookkeeping for D(alpha, beta): phi(e_alpha) = alpha^{-1} e_alpha etc.
    alpha: PadicScalar | None = field(default=None, compare=False)
    beta: PadicScalar | None = field(default=None, compare=False)
    k: int | None = None
    generic: bool = True

    @property
    def dim(self) -> int:
        return len(self.phi)

    def det(self) -> PadicScalar:
        if self.dim == 1:
            return self.phi[0][0]
        (a, b), (c, d) = self.phi
        return a * d - b * c

    def trace(self) -> PadicScalar:
        return self.phi[0][0] if self.dim == 1 else self.phi[0][0] + self.phi[1][1]

    def apply(self, v: Sequence[PadicScalar]) -> list:
        return [sum((self.phi[i][j] * v[j] for j in range(self.dim)), PadicScalar.zero(self.F))
                for i in range(self.dim)]

    def fil(self, i: int) -> str:
        """Which piece Fil^i is: 'D', 'line' or '0'."""
        if self.dim == 1:
            return "D" if i <= self.jumps[0] else "0"
        h1, h2 = self.jumps
        if i <= h1:
            return "D"
        return "line" if i <= h2 else "0"

    def to_text(self) -> str:
        F = self.F
        parts = [f"p={F.p}", f"N={F.N}"]
        if self.k is not None:
            parts.append(f"k={self.k}")
        if self.alpha is not None:
            parts += [f"alpha={self.alpha}", f"beta={self.beta}"]
        parts.append("phi=[" + "; ".join(", ".join(str(x) for x in row) for row in self.phi) + "]")
        parts.append(f"jumps={list(self.jumps)}")
        if self.delta is not None:
            parts.append("delta=(" + ", ".join(str(x) for x in self.delta) + ")")
        return "filtmod{ " + ", ".join(parts) + " }"


def tN(D: FilteredPhiModule):
    return D.det().val()


def tH(D: FilteredPhiModule) -> int:
    return sum(D.jumps)


def phi_slopes(D: FilteredPhiModule) -> tuple:
    """Valuations of the eigenvalues of phi (Newton polygon of the char poly)."""
    if D.dim == 1:
        return (D.phi[0][0].val(),)
    vn = D.det().val()
    vt = D.trace().val()
    if vt != INF and vt <= Fraction(vn) / 2:
        return (vt, vn - vt)
    half = Fraction(vn) / 2
    half = int(half) if half.denominator == 1 else half
    return (half, half)


def _is_scalar(D: FilteredPhiModule) -> bool:
    (a, b), (c, d) = D.phi
    return b.is_zero() and c.is_zero() and (a - d).is_zero()


def _parallel(D: FilteredPhiModule, u, v) -> bool:
    return (u[0] * v[1] - u[1] * v[0]).is_zero()


def delta_eigenvalue(D: FilteredPhiModule):
    """Eigenvalue of phi on the line Delta, or None when Delta is not stable."""
    d = D.delta
    w = D.apply(d)
    if not _parallel(D, d, w):
        return None
    i = 0 if not d[0].is_zero() else 1
    return w[i] / d[i]


def is_admissible(D: FilteredPhiModule):
    """Return ``(ok, witness)``; the witness names the violating object."""
    if D.dim == 1:
        ok = tN(D) == tH(D)
        return ok, None if ok else {"object": "D", "tN": tN(D), "tH": tH(D)}
    disc = D.trace() * D.trace() - 4 * D.det()
    if disc.is_zero() and not _is_scalar(D):
        raise NonSemisimplePhi("repeated eigenvalue with non-scalar phi")
    if tN(D) != tH(D):
        return False, {"object": "D", "tN": tN(D), "tH": tH(D)}
    h1, h2 = D.jumps
    if h1 < h2:
        lam = delta_eigenvalue(D)
        if lam is not None and lam.val() < h2:
            return False, {"object": "line", "line": D.delta, "tN": lam.val(), "tH": h2}
    s1 = min(phi_slopes(D))
    if s1 < h1:
        return False, {"object": "line", "line": eigenline(D, s1), "tN": s1, "tH": h1}
    return True, None


def eigenline(D: FilteredPhiModule, slope):
    """A vector spanning the eigenline with the given slope (diagonal or rational case)."""
    (a, b), (c, d) = D.phi
    if b.is_zero() and c.is_zero():
        if a.val() == slope:
            return (_s(D.F, 1), _s(D.F, 0))
        return (_s(D.F, 0), _s(D.F, 1))
    lam = _root_with_slope(D, slope)
    if not b.is_zero():
        return (b, lam - a)
    return (lam - d, c)


def _root_with_slope(D: FilteredPhiModule, slope) -> PadicScalar:
    """Hensel/fixed-point root of X^2 - tX + n of the requested valuation."""
    t, n = D.trace(), D.det()
    s1, s2 = sorted(phi_slopes(D))
    if s1 == s2:
        raise ValueError("equal slopes: eigenvalues need not be rational")
    lam = t  # root of smaller valuation is the dominant one: lam = t - n/lam
    for _ in range(4 * D.F.N + 8):
        nxt = t - n / lam
        if (nxt - lam).is_zero():
            break
        lam = nxt
    return lam if slope == s1 else n / lam


def classify(D: FilteredPhiModule) -> str:
    if D.dim != 2:
        raise ValueError("classification needs dimension 2")
    ok, wit = is_admissible(D)
    if not ok:
        raise NotAdmissible(f"module is not admissible: {wit}")
    h1, h2 = D.jumps
    s = sorted(phi_slopes(D))
    # u = h2 - slope is val(alpha), val(beta) in the normalized shape
    u = sorted(h2 - x for x in s)
    if u[0] > 0:
        return ABS_IRRED
    # slope h2 belongs to the beta line; split iff delta lies on it
    lam = delta_eigenvalue(D)
    if lam is not None and lam.val() == h2:
        return SPLIT
    return NONSPLIT


def make_Dab(alpha, beta, k: int, case: str = ABS_IRRED, F: FieldDesc | None = None) -> FilteredPhiModule:
    """D(alpha, beta): phi(e_alpha) = alpha^{-1} e_alpha, phi(e_beta) = beta^{-1} e_beta,
    jumps (-(k-1), 0) and delta chosen according to the requested case."""
    if F is None:
        F = alpha.F if isinstance(alpha, PadicScalar) else beta.F
    a, b = _s(F, alpha), _s(F, beta)
    if a.val() + b.val() != k - 1:
        raise WeightMismatch(f"val(alpha)+val(beta) = {a.val() + b.val()} != k-1 = {k - 1}")
    one, zero = _s(F, 1), PadicScalar.zero(F)
    if case == SPLIT:
        # delta is the eigenline of the unit root
        delta = (zero, one) if b.val() == 0 else (one, zero)
    else:
        delta = (one, one)
    phi = ((a.inverse(), zero), (zero, b.inverse()))
    generic = not (a - b).is_zero() and not (a - b * F.p).is_zero()
    return FilteredPhiModule(F, phi, (-(k - 1), 0), delta, a, b, k, generic)


def make_Dkap(k: int, ap, F: FieldDesc | None = None) -> FilteredPhiModule:
    """phi(e1) = p^{k-1} e2, phi(e2) = -e1 + a_p e2; Fil^i = E e1 for 1 <= i <= k-1."""
    if F is None:
        F = ap.F
    ap = _s(F, ap)
    if ap.val() <= 0:
        raise ValueError("make_Dkap needs val(a_p) > 0")
    p = F.p
    one, zero = _s(F, 1), PadicScalar.zero(F)
    phi = ((zero, -one), (_s(F, p ** (k - 1)), ap))
    return FilteredPhiModule(F, phi, (0, k - 1), (one, zero), None, None, k, True)


def rank_one(F: FieldDesc, lam, weight: int) -> FilteredPhiModule:
    """phi(e) = lam e, Hodge-Tate weight h: Fil^{-h} = D and Fil^{-h+1} = 0."""
    return FilteredPhiModule(F, ((_s(F, lam),),), (-weight,), None)


def twist(D: FilteredPhiModule, n: int) -> FilteredPhiModule:
    """Tensor with the module of Q_p(n): phi * p^{-n}, jumps moved by -n."""
    if n == 0:
        return D
    c = PadicScalar.from_rational(D.F, Fraction(1, D.F.p ** n) if n > 0 else D.F.p ** (-n))
    phi = tuple(tuple(x * c for x in row) for row in D.phi)
    jumps = tuple(h - n for h in D.jumps)
    return FilteredPhiModule(D.F, phi, jumps, D.delta, D.alpha, D.beta, D.k, D.generic)


def charpoly(D: FilteredPhiModule) -> tuple:
    """Coefficients (c0, c1, 1) of det(X - phi)."""
    if D.dim == 1:
        return (-D.phi[0][0], _s(D.F, 1))
    return (D.det(), -D.trace(), _s(D.F, 1))
