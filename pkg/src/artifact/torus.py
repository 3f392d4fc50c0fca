"""Integer lattices for torus vertex spaces.

Lattices are stored in row Hermite normal form.  Everything is exact integer
arithmetic on small matrices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce as _fold

INFINITE = math.inf


def hnf_transform(rows, m):
    """Row-reduce ``rows`` (n x m) to Hermite normal form.

    Returns ``(H, U)`` with ``U`` unimodular (n x n) and ``U * rows`` equal to
    ``H`` padded with zero rows; the rows of ``U`` past ``len(H)`` span the
    integer kernel of ``rows``.
    """
    M = [list(r) for r in rows]
    n = len(M)
    U = [[int(i == j) for j in range(n)] for i in range(n)]
    r = 0
    for col in range(m):
        if r == n:
            break
        while True:
            nz = [i for i in range(r, n) if M[i][col] != 0]
            if not nz:
                break
            piv = min(nz, key=lambda i: abs(M[i][col]))
            M[r], M[piv] = M[piv], M[r]
            U[r], U[piv] = U[piv], U[r]
            done = True
            for i in range(r + 1, n):
                if M[i][col]:
                    q = M[i][col] // M[r][col]
                    M[i] = [a - q * b for a, b in zip(M[i], M[r])]
                    U[i] = [a - q * b for a, b in zip(U[i], U[r])]
                    if M[i][col]:
                        done = False
            if done:
                break
        if r < n and M[r][col] != 0:
            if M[r][col] < 0:
                M[r] = [-a for a in M[r]]
                U[r] = [-a for a in U[r]]
            for i in range(r):
                q = M[i][col] // M[r][col]
                if q:
                    M[i] = [a - q * b for a, b in zip(M[i], M[r])]
                    U[i] = [a - q * b for a, b in zip(U[i], U[r])]
            r += 1
    return [tuple(row) for row in M[:r]], U


def _pivots(rows):
    return [next(j for j, a in enumerate(row) if a) for row in rows]


@dataclass(frozen=True)
class Lattice:
    m: int
    rows: tuple

    @property
    def rank(self):
        return len(self.rows)

    @property
    def full_rank(self):
        return self.rank == self.m

    @property
    def index(self):
        if not self.full_rank:
            return INFINITE
        return abs(_fold(lambda a, b: a * b, (self.rows[i][i] for i in range(self.m)), 1))

    def reduce(self, v):
        """Canonical representative of ``v`` modulo the lattice."""
        v = list(v)
        for row, p in zip(self.rows, _pivots(self.rows)):
            q = v[p] // row[p]
            if q:
                v = [a - q * b for a, b in zip(v, row)]
        return tuple(v)

    def contains(self, v):
        return not any(self.reduce(v))

    def to_json(self):
        return [list(r) for r in self.rows]


def hnf(rows, m=None):
    rows = [tuple(int(a) for a in r) for r in rows]
    if m is None:
        if not rows:
            raise ValueError("ambient rank needed for an empty row set")
        m = len(rows[0])
    if any(len(r) != m for r in rows):
        raise ValueError("row length mismatch")
    H, _ = hnf_transform(rows, m)
    return Lattice(m, tuple(H))


def full_lattice(m):
    return Lattice(m, tuple(tuple(int(i == j) for j in range(m)) for i in range(m)))


def zero_lattice(m):
    return Lattice(m, ())


def join(L, vectors):
    return hnf(list(L.rows) + [tuple(v) for v in vectors], L.m)


def in_span(L, v):
    """Is ``v`` in the rational span of ``L``?"""
    H, _ = hnf_transform(list(L.rows) + [tuple(v)], L.m)
    return len(H) == L.rank


def saturation(L):
    """Rational span of ``L`` intersected with Z^m."""
    if L.rank == 0:
        return L
    # kernel of the dual: integer vectors orthogonal to L, then their kernel
    cols = [tuple(L.rows[i][j] for i in range(L.rank)) for j in range(L.m)]
    Hc, U = hnf_transform(cols, L.rank)
    perp = U[len(Hc):]
    if not perp:
        return full_lattice(L.m)
    cols2 = [tuple(p[j] for p in perp) for j in range(L.m)]
    H2, U2 = hnf_transform(cols2, len(perp))
    return hnf(U2[len(H2):], L.m)


def elevation_degree(L, v):
    """Least d >= 1 with d*v in L, or INFINITE."""
    v = tuple(v)
    if not any(v):
        raise ValueError("zero vector")
    rows = list(L.rows) + [v]
    H, U = hnf_transform(rows, L.m)
    g = 0
    for k in U[len(H):]:
        g = math.gcd(g, k[-1])
    return g if g else INFINITE


def solve(L, v):
    """Integer coefficients c with sum c_i rows_i == v, or None."""
    rows = list(L.rows) + [tuple(-a for a in v)]
    H, U = hnf_transform(rows, L.m)
    g = 0
    ks = U[len(H):]
    for k in ks:
        g = math.gcd(g, k[-1])
    if g != 1:
        return None
    # combine kernel vectors to get last coordinate exactly 1
    coeffs = _bezout([k[-1] for k in ks])
    comb = [sum(c * k[i] for c, k in zip(coeffs, ks)) for i in range(len(rows))]
    assert comb[-1] == 1
    return comb[:-1]


def _bezout(nums):
    """Integers c with sum c_i nums_i == gcd(nums)."""
    coeffs = [0] * len(nums)
    g = 0
    for i, a in enumerate(nums):
        if a == 0:
            continue
        if g == 0:
            g = abs(a)
            coeffs = [0] * len(nums)
            coeffs[i] = 1 if a > 0 else -1
            continue
        x, y, g2 = _egcd(g, a)
        coeffs = [c * x for c in coeffs]
        coeffs[i] += y
        g = g2
    return coeffs


def _egcd(a, b):
    """(x, y, g) with a x + b y = g = gcd(a, b) >= 0."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q = a // b
        a, b = b, a - q * b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return x0, y0, a


def unimodular_completion(v):
    """Unimodular basis (list of rows) whose first row is the primitive ``v``.

    Column-reduces ``v`` to ``e_1`` by extended gcd steps while tracking the
    inverse transform, whose rows are the answer.
    """
    v = list(v)
    m = len(v)
    if _fold(math.gcd, v, 0) != 1:
        raise ValueError("vector is not primitive")
    inv = [[int(i == j) for j in range(m)] for i in range(m)]  # rows of W^-1
    # invariant: v_current = v_original * W ; rows of inv = W^-1
    for j in range(1, m):
        a, b = v[0], v[j]
        if b == 0:
            continue
        x, y, g = _egcd(a, b)
        # column op: [c0, cj] <- [c0, cj] * [[x, -b/g], [y, a/g]]
        p, q = -b // g, a // g
        v[0], v[j] = g, 0
        # inverse of [[x, p], [y, q]] is [[q, -p], [-y, x]] (det 1)
        r0, rj = inv[0], inv[j]
        inv[0] = [q * s - p * t for s, t in zip(r0, rj)]
        inv[j] = [-y * s + x * t for s, t in zip(r0, rj)]
    if v[0] == -1:
        inv[0] = [-s for s in inv[0]]
    return [tuple(r) for r in inv]


def single_elevation_cover(m, v, d):
    v = tuple(v)
    if len(v) != m:
        raise ValueError("dimension mismatch")
    if d < 1:
        raise ValueError("degree must be positive")
    basis = unimodular_completion(v)
    assert basis[0] == v
    return hnf([tuple(d * a for a in v)] + basis[1:], m)


def elevation_count(L, v):
    """Number of elevations of the loop ``v`` to the quotient Z^m / L."""
    J = join(L, [v])
    if not J.full_rank:
        return INFINITE
    return J.index


@dataclass(frozen=True)
class TorusTame:
    lattice: Lattice
    subgroup: Lattice
    direction: tuple
    degree: int
    period: int
    complement: tuple  # rows completing sat(H + Zv) to a basis of Z^m
    offsets: tuple
    descended: tuple  # canonical coset representatives of the descended offsets

    def project(self, w):
        """Retraction of a lattice vector onto the subgroup (along the complement)."""
        gens = list(self.subgroup.rows) + [tuple(self.degree * a for a in self.direction)] \
            + [tuple(self.period * a for a in c) for c in self.complement]
        basis = Lattice(self.lattice.m, tuple(gens))
        c = _solve_exact(basis.rows, w)
        if c is None:
            raise ValueError("vector not in the cover lattice")
        k = self.subgroup.rank
        out = [0] * self.lattice.m
        for ci, row in zip(c[:k], gens[:k]):
            out = [a + ci * b for a, b in zip(out, row)]
        return tuple(out)


def _solve_exact(rows, w):
    return solve(Lattice(len(w), tuple(rows)), w)


def _direction_vector(v, m):
    if isinstance(v, int):
        return tuple(int(i == v) for i in range(m))
    return tuple(v)


def box_points(box):
    if not box:
        return []
    return list(itertools.product(*[range(a, b + 1) for a, b in box]))


def _tame_ok(H, v, offsets, box, d, period, complement):
    gens = list(H.rows) + [tuple(d * a for a in v)] + \
        [tuple(period * a for a in c) for c in complement]
    L = hnf(gens, H.m)
    Lv = join(L, [v])
    HV = join(H, [v])
    for a, b in itertools.combinations(offsets, 2):
        diff = tuple(x - y for x, y in zip(a, b))
        if HV.contains(diff) or Lv.contains(diff):
            return False
    pts = box_points(box)
    seen = {}
    for p in pts:
        key = L.reduce(p)
        hkey = H.reduce(p)
        if key in seen and seen[key] != hkey:
            return False
        seen[key] = hkey
    return True


def _complement(H, v):
    """Rows completing the saturation of H + Zv to a unimodular basis."""
    S = saturation(join(H, [v]))
    m, r = H.m, S.rank
    if r == m:
        return ()
    Bt = [tuple(S.rows[i][j] for i in range(r)) for j in range(m)]
    _, Up = hnf_transform(Bt, r)
    _, V = hnf_transform(Up, m)  # V = Up^-1
    extra = [tuple(V[i][k] for i in range(m)) for k in range(r, m)]
    assert hnf(list(S.rows) + extra, m).index == 1
    return tuple(extra)


def _rational_coords(basis, w):
    m = len(w)
    A = [[Fraction(basis[i][j]) for i in range(m)] + [Fraction(w[j])] for j in range(m)]
    for i in range(m):
        p = next(k for k in range(i, m) if A[k][i] != 0)
        A[i], A[p] = A[p], A[i]
        A[i] = [a / A[i][i] for a in A[i]]
        for k in range(m):
            if k != i and A[k][i]:
                A[k] = [a - A[k][i] * b for a, b in zip(A[k], A[i])]
    return [A[i][m] for i in range(m)]


def _safe_degree(H, v, offsets, box, complement):
    """A degree above which every degree works.

    Write each relevant difference in the rational basis (H, v, complement).
    Once d exceeds every |coefficient| along v and the complement, a difference
    lying in L (or L + Zv) already lies in H + Zv, resp. H.
    """
    basis = list(H.rows) + [v] + list(complement)
    pts = box_points(box)
    diffs = [tuple(x - y for x, y in zip(a, b))
             for S in (offsets, pts) for a, b in itertools.combinations(S, 2)]
    top = 0
    for diff in diffs:
        c = _rational_coords(basis, diff)[H.rank:]
        top = max([top] + [abs(x) for x in c])
    return math.floor(top) + 1


def tame_threshold(H, offsets, v, box=None, period=None, cap=512):
    """Least d0 such that every degree d >= d0 works.

    Feasibility is not monotone in d (a period dividing an offset separation
    can merge elevations), so this scans down from a degree known to be safe.
    """
    v = _direction_vector(v, H.m)
    complement = _complement(H, v)
    if in_span(H, v):
        raise ValueError("designated elevations already have finite degree")
    top = _safe_degree(H, v, offsets, box, complement)
    if top > cap:
        raise ValueError("no feasible degree below the cap")
    d0 = top + 1
    for d in range(top, 0, -1):
        if not _tame_ok(H, v, offsets, box, d, d if period is None else period, complement):
            break
        d0 = d
    if d0 > top and not _tame_ok(H, v, offsets, box, d0, d0 if period is None else period,
                                 complement):
        raise ValueError("no feasible degree")
    return d0


def period_threshold(H, offsets, v, box=None, cap=512):
    """Least complementary period that works for every large degree."""
    v = _direction_vector(v, H.m)
    complement = _complement(H, v)
    if not complement:
        return 1
    big = 10 ** 6
    for p in range(1, cap + 1):
        if _tame_ok(H, v, offsets, box, big, p, complement):
            return p
    raise ValueError("no feasible period below the cap")


def torus_tame(H, offsets, v, d, box=None, period=None, loops=1):
    """Full-rank lattice over ``H`` in which each designated line has degree ``d``.

    ``offsets`` are coset offsets of the designated elevations of the single
    loop ``v`` (a coordinate index or vector); ``box`` is a list of integer
    intervals whose points must embed.  ``period`` (default ``d``) is used in
    the directions complementary to ``H`` and ``v``.
    """
    if loops != 1:
        raise ValueError("torus requests with several loops are not supported")
    v = _direction_vector(v, H.m)
    offsets = tuple(tuple(o) for o in offsets)
    if H.full_rank:
        return TorusTame(H, H, v, elevation_degree(H, v), 1, (), offsets,
                         tuple(H.reduce(o) for o in offsets))
    if in_span(H, v):
        raise ValueError("designated elevations already have finite degree")
    HV = join(H, [v])
    for a, b in itertools.combinations(offsets, 2):
        if HV.contains(tuple(x - y for x, y in zip(a, b))):
            raise ValueError("offsets collide")
    P = d if period is None else period
    complement = _complement(H, v)
    if not _tame_ok(H, v, offsets, box, d, P, complement):
        raise ValueError(f"degree below threshold (threshold "
                         f"{tame_threshold(H, offsets, v, box, period)})")
    gens = list(H.rows) + [tuple(d * a for a in v)] + \
        [tuple(P * a for a in c) for c in complement]
    L = hnf(gens, H.m)
    return TorusTame(L, H, v, d, P, complement, offsets,
                     tuple(L.reduce(o) for o in offsets))
