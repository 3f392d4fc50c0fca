"""Pre-covers of ICE spaces of level <= 1.

A pre-cover is a labelled free graph (covering the free vertex space locally),
a set of torus pieces (quotients of the plane Z^m by a lattice) and rungs.  A
rung ``(p, j, q)`` glues the z-line of the free graph through ``p`` (phase 0)
to the line ``q + Z e_1`` of torus piece ``j``.

Labels make the fundamental group explicit.  Fix (abstract) group elements
``c(v)`` for free vertices and ``c_j`` for torus pieces.  Then

* an edge ``u -x-> v`` carries ``c(u) x c(v)^-1``;
* a rung ``(p, j, q)`` carries ``c(p) (c_j tau(q))^-1``;
* a lattice vector ``l`` of piece ``j`` carries ``c_j tau(l) c_j^-1``;

where ``tau(v) = z^v1 t_1^v2 ...``.  Labels are words in symbols for the
subgroup generators plus auxiliary symbols introduced when arcs are closed.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass

from artifact import ice as icem
from artifact import stallings as st
from artifact import torus as tor
from artifact import words as wd

INFINITE = math.inf
mul = wd.mul
inv = wd.inverse


class PreCoverError(ValueError):
    pass


class DisparityError(PreCoverError):
    pass


def lpow(w, k):
    return wd.power(w, k)


@dataclass
class Piece:
    gens: list  # [(vector, label)] in Hermite normal form
    marks: set
    origin: str
    aux: bool = False

    def lattice(self, m):
        return tor.Lattice(m, tuple(v for v, _ in self.gens))


class PreCover:
    """Mutable labelled pre-cover; public operations work on copies."""

    def __init__(self, X, n_symbols, level=None):
        self.X = X
        self.level = X.top if level is None else level
        if self.level > 1:
            raise icem.GuardrailError("pre-cover pipeline supports levels 0 and 1")
        self.rank = X.base_rank
        if self.level == 1:
            ext = X.extensions[0]
            self.m = ext.m
            self.z = ext.z
            self.tletters = ext.letters
        else:
            self.m = 0
            self.z = ()
            self.tletters = ()
        self.nsym = n_symbols
        self.nY = 0
        self.nv = 1
        self.alive = {0}
        self.base = 0
        self.edges = {}  # eid -> [u, x, v, label]
        self.out = {}  # (v, x) -> eid
        self.inn = {}
        self.neid = 0
        self.rungs = {}  # rid -> [p, j, q, label]
        self.nrid = 0
        self.pieces = {}  # j -> Piece
        self.npid = 0
        self.parent = {}  # merged vertex -> (vertex, factor)
        self.markers = {}
        self.vorigin = {0: "core"}
        self.queue = deque()
        self.max_vertices = 20000
        self.max_rounds = 200000

    # ------------------------------------------------------------------ copy
    def copy(self):
        P = PreCover.__new__(PreCover)
        P.__dict__.update(self.__dict__)
        P.alive = set(self.alive)
        P.edges = {k: list(v) for k, v in self.edges.items()}
        P.out = dict(self.out)
        P.inn = dict(self.inn)
        P.rungs = {k: list(v) for k, v in self.rungs.items()}
        P.pieces = {k: Piece(list(p.gens), set(p.marks), p.origin, p.aux)
                    for k, p in self.pieces.items()}
        P.parent = dict(self.parent)
        P.markers = dict(self.markers)
        P.vorigin = dict(self.vorigin)
        P.queue = deque(self.queue)
        return P

    # --------------------------------------------------------------- basics
    def new_vertex(self, origin="core"):
        v = self.nv
        self.nv += 1
        self.alive.add(v)
        self.vorigin[v] = origin
        if len(self.alive) > self.max_vertices:
            raise icem.GuardrailError("pre-cover vertex cap exceeded")
        return v

    def add_edge(self, u, x, v, label=()):
        """Add ``u -x-> v``; clashes are queued as folds."""
        e = self.neid
        self.neid += 1
        self.edges[e] = [u, x, v, label]
        self._insert(e)
        return e

    def _insert(self, e):
        u, x, v, lab = self.edges[e]
        o = self.out.get((u, x))
        i = self.inn.get((v, x))
        if o is None and i is None:
            self.out[(u, x)] = e
            self.inn[(v, x)] = e
            return
        del self.edges[e]
        if o is not None:
            u2, _, v2, lab2 = self.edges[o]
            # c(u) x = lab c(v) = lab2 c(v2)  =>  c(v) = lab^-1 lab2 c(v2)
            self.queue.append((v, v2, mul(inv(lab), lab2)))
        else:
            u2, _, v2, lab2 = self.edges[i]
            # c(u) x = lab c(v), c(u2) x = lab2 c(v) => c(u) = lab lab2^-1 c(u2)
            self.queue.append((u, u2, mul(lab, inv(lab2))))

    def resolve(self, v):
        f = ()
        while v in self.parent:
            w, nu = self.parent[v]
            f = mul(f, nu)
            v = w
        return v, f

    def new_piece(self, origin, gens=(), marks=(), aux=False):
        j = self.npid
        self.npid += 1
        self.pieces[j] = Piece([], set(map(tuple, marks)), origin, aux)
        if gens:
            self.add_lattice(j, gens)
        return j

    def add_rung(self, p, j, q, label=()):
        r = self.nrid
        self.nrid += 1
        q = tuple(q)
        self.rungs[r] = [p, j, q, label]
        self.pieces[j].marks.add(q)
        return r

    def rungs_at(self, v):
        return sorted(r for r, (p, _, _, _) in self.rungs.items() if p == v)

    # ---------------------------------------------------------------- merge
    def merge(self, a, b, nu):
        """Identify a and b, where c(a) = nu c(b)."""
        self.queue.append((a, b, nu))
        self.drain()

    def drain(self):
        while self.queue:
            a, b, nu = self.queue.popleft()
            ra, al = self.resolve(a)
            rb, be = self.resolve(b)
            if ra == rb:
                continue
            k = mul(inv(al), nu, be)  # c(ra) = k c(rb)
            if ra == self.base:
                ra, rb, k = rb, ra, inv(k)
            self._absorb(ra, rb, k)

    def _absorb(self, gone, keep, k):
        """Merge vertex ``gone`` into ``keep`` with c(gone) = k c(keep)."""
        self.parent[gone] = (keep, k)
        self.alive.discard(gone)
        touched = []
        for x in range(self.rank):
            for tab in (self.out, self.inn):
                e = tab.pop((gone, x), None)
                if e is not None and e not in touched:
                    touched.append(e)
        for e in touched:
            u, x, v, lab = self.edges[e]
            # remove from tables at the far ends
            if self.out.get((u, x)) == e:
                del self.out[(u, x)]
            if self.inn.get((v, x)) == e:
                del self.inn[(v, x)]
            if u == gone:
                lab = mul(inv(k), lab)
                u = keep
            if v == gone:
                lab = mul(lab, k)
                v = keep
            self.edges[e] = [u, x, v, lab]
        for e in touched:
            self._insert(e)
        for r, rung in self.rungs.items():
            if rung[0] == gone:
                rung[0] = keep
                rung[3] = mul(inv(k), rung[3])
        for name, (v, lab) in self.markers.items():
            if v == gone:
                self.markers[name] = (keep, mul(lab, k))

    # ------------------------------------------------------------- reading
    def step(self, v, x, s):
        """Follow a free letter: (target, label increment) or None."""
        if s > 0:
            e = self.out.get((v, x))
            if e is None:
                return None
            return self.edges[e][2], self.edges[e][3]
        e = self.inn.get((v, x))
        if e is None:
            return None
        return self.edges[e][0], inv(self.edges[e][3])

    def free_step(self, v, x, s, lazy=False, origin="completion"):
        r = self.step(v, x, s)
        if r is not None or not lazy:
            return r
        w = self.new_vertex(origin)
        if s > 0:
            self.add_edge(v, x, w)
        else:
            self.add_edge(w, x, v)
        return w, ()

    def read_free(self, v, w, lazy=False, origin="completion"):
        """Read a free word; returns (end, label) with c(v) w = label c(end)."""
        lab = ()
        for x, s in w:
            r = self.free_step(v, x, s, lazy, origin)
            if r is None:
                return None
            v, inc = r
            lab = mul(lab, inc)
        return v, lab

    def read_zpow(self, v, k, lazy=False, origin="completion"):
        return self.read_free(v, wd.power(self.z, k), lazy, origin)

    def zline(self, v):
        """Phase-0 points of the z-line through v: (points {k: (vertex, label)}, period)."""
        pts = {0: (v, ())}
        cur, lab, k = v, (), 0
        while True:
            r = self.read_free(cur, self.z)
            if r is None:
                break
            cur, inc = r
            lab = mul(lab, inc)
            k += 1
            if cur == v:
                return pts, k, lab
            pts[k] = (cur, lab)
        cur, lab, k = v, (), 0
        while True:
            r = self.read_free(cur, inv(self.z))
            if r is None:
                break
            cur, inc = r
            lab = mul(lab, inc)
            k -= 1
            pts[k] = (cur, lab)
        return pts, INFINITE, None

    def line_rung(self, v):
        """Rung on the z-line of v: (rid, k, mu) with v = p z^k and c(p) z^k = mu c(v)."""
        pts, period, _ = self.zline(v)
        by_vertex = {}
        for r, (p, _, _, _) in sorted(self.rungs.items()):
            by_vertex.setdefault(p, r)
        for k in sorted(pts, key=lambda t: (abs(t), t)):
            w, lab = pts[k]
            if w in by_vertex:
                # c(v) z^k = lab c(w)  =>  c(w) z^-k = lab^-1 c(v)
                return by_vertex[w], -k, inv(lab)
        return None

    # -------------------------------------------------------------- lattices
    def add_lattice(self, j, gens):
        P = self.pieces[j]
        allg = P.gens + [(tuple(v), lab) for v, lab in gens]
        rows = [v for v, _ in allg]
        H, U = tor.hnf_transform(rows, self.m)
        new = []
        for i, row in enumerate(H):
            lab = mul(*[lpow(allg[c][1], U[i][c]) for c in range(len(allg)) if U[i][c]])
            new.append((row, lab))
        changed = [v for v, _ in new] != [v for v, _ in P.gens]
        P.gens = new
        return changed

    def lam(self, j, ell):
        """Label of a lattice vector of piece j."""
        ell = tuple(ell)
        if not any(ell):
            return ()
        P = self.pieces[j]
        c = tor.solve(P.lattice(self.m), ell)
        if c is None:
            raise PreCoverError("vector not in piece lattice")
        return mul(*[lpow(lab, ci) for (_, lab), ci in zip(P.gens, c) if ci])

    def e1(self):
        return tuple(int(i == 0) for i in range(self.m))

    def e1_order(self, j):
        return tor.elevation_degree(self.pieces[j].lattice(self.m), self.e1())

    def coset_key(self, j, q):
        L = self.pieces[j].lattice(self.m)
        return tor.join(L, [self.e1()]).reduce(q)

    def split_e1(self, j, y):
        """Write y = k e1 + l with l in the piece lattice: (k, l) or None."""
        P = self.pieces[j]
        basis = tor.Lattice(self.m, tuple([self.e1()] + [v for v, _ in P.gens]))
        c = tor.solve(basis, y)
        if c is None:
            return None
        k = c[0]
        ell = tuple(a - k * b for a, b in zip(y, self.e1()))
        return k, ell

    # ------------------------------------------------------------ torus moves
    def ensure_line_rung(self, v, origin="completion", marks_box=False):
        """Rung on v's z-line, creating a fresh torus sheet if needed."""
        r = self.line_rung(v)
        if r is not None:
            return r
        pts, period, lab = self.zline(v)
        gens = [] if period == INFINITE else [(tuple(period * a for a in self.e1()), lab)]
        marks = [(0,) * self.m]
        if marks_box:
            marks = list(itertools.product(*[range(-1, 2)] * self.m))
        j = self.new_piece(origin, gens, marks)
        rid = self.add_rung(v, j, (0,) * self.m)
        return rid, 0, ()

    def coset_rung(self, j, y):
        """Rung of piece j on the e1-coset of y: (rid, k', l) with y = q' + k' e1 + l."""
        key = self.coset_key(j, y)
        for r, (p, jj, q, lab) in sorted(self.rungs.items()):
            if jj == j and self.coset_key(j, q) == key:
                diff = tuple(a - b for a, b in zip(y, q))
                k, ell = self.split_e1(j, diff)
                return r, k, ell
        return None

    def attach_fresh_free(self, j, y, origin="completion"):
        """Fresh free piece glued to the coset of y in piece j."""
        w = self.new_vertex(origin)
        rid = self.add_rung(w, j, y)
        D = self.e1_order(j)
        if D != INFINITE:
            big = self.lam(j, tuple(D * a for a in self.e1()))
            self._zcycle(w, D, big, origin)
        return rid

    def _zcycle(self, w, D, label, origin):
        """Build a fresh z^D cycle at w whose total label is ``label``."""
        word = wd.power(self.z, D)
        cur = w
        for i, (x, s) in enumerate(word):
            last = i == len(word) - 1
            nxt = w if last else self.new_vertex(origin)
            lab = label if last else ()
            if s > 0:
                self.add_edge(cur, x, nxt, lab)
            else:
                self.add_edge(nxt, x, cur, inv(lab))
            cur = nxt
        self.drain()

    def torus_move(self, v, vec, lazy=False, origin="completion"):
        """Move v by a torus vector: (target, label increment, info) or None."""
        r = self.line_rung(v)
        if r is None:
            if not lazy:
                return None
            r = self.ensure_line_rung(v, origin)
        rid, k, mu = r
        p, j, q, lam = self.rungs[rid]
        x = tuple(a + k * b for a, b in zip(q, self.e1()))
        y = tuple(a + b for a, b in zip(x, vec))
        r2 = self.coset_rung(j, y)
        if r2 is None:
            if not lazy:
                return None
            self.attach_fresh_free(j, y, origin)
            r2 = self.coset_rung(j, y)
        rid2, k2, ell = r2
        p2, _, q2, lam2 = self.rungs[rid2]
        rr = self.read_zpow(p2, k2, lazy, origin)
        if rr is None:
            return None
        w, mu2 = rr
        inc = mul(inv(mu), lam, self.lam(j, ell), inv(lam2), mu2)
        return w, inc, (rid, x, rid2)

    def read(self, v, w, lazy=False, origin="completion"):
        """Read a word with free and torus letters: (end, label) or None.

        A run of consecutive torus letters is applied as one vector move, so
        the intermediate torus positions need no free vertex.
        """
        lab = ()
        i = 0
        while i < len(w):
            x, s = w[i]
            if self.level and x in self.tletters:
                vec = [0] * self.m
                while i < len(w) and w[i][0] in self.tletters:
                    vec[1 + self.tletters.index(w[i][0])] += w[i][1]
                    i += 1
                r = self.torus_move(v, tuple(vec), lazy, origin)
                if r is None:
                    return None
                v, inc, _ = r
            else:
                r = self.free_step(v, x, s, lazy, origin)
                if r is None:
                    return None
                v, inc = r
                i += 1
            lab = mul(lab, inc)
            self.drain()
        return v, lab

    # -------------------------------------------------------------- folding
    def fold(self):
        """Apply folding moves until the structure is a pre-cover."""
        rounds = 0
        while True:
            self.drain()
            rounds += 1
            if rounds > self.max_rounds:
                raise icem.GuardrailError("folding did not stabilise")
            if not self.level:
                return
            if self._fold_same_line() or self._fold_same_coset() or self._fold_degrees():
                continue
            return

    def _fold_same_line(self):
        """Two rungs on one z-line: identify their torus lines."""
        for r1 in sorted(self.rungs):
            p1, j1, q1, l1 = self.rungs[r1]
            pts, period, _ = self.zline(p1)
            for k in sorted(pts, key=lambda t: (abs(t), t)):
                w, mu = pts[k]
                for r2 in self.rungs_at(w):
                    if r2 == r1:
                        continue
                    p2, j2, q2, l2 = self.rungs[r2]
                    s = tuple(a + k * b - c for a, b, c in zip(q1, self.e1(), q2))
                    kappa = mul(inv(l2), inv(mu), l1)
                    del self.rungs[r2]
                    if j1 == j2:
                        self.add_lattice(j1, [(s, inv(kappa))])
                    else:
                        self._merge_pieces(j2, j1, s, kappa)
                    return True
        return False

    def _merge_pieces(self, j2, j1, s, kappa):
        """Merge piece j2 into j1: point q of j2 is q + s of j1; c_j2 = kappa c_j1 tau(s)."""
        P2 = self.pieces.pop(j2)
        for r, rung in self.rungs.items():
            if rung[1] == j2:
                rung[1] = j1
                rung[2] = tuple(a + b for a, b in zip(rung[2], s))
                rung[3] = mul(rung[3], kappa)
        self.pieces[j1].marks |= {tuple(a + b for a, b in zip(q, s)) for q in P2.marks}
        self.add_lattice(j1, [(v, mul(inv(kappa), lab, kappa)) for v, lab in P2.gens])

    def _fold_same_coset(self):
        """Two rungs on one e1-coset of a torus piece: identify their z-lines."""
        groups = {}
        for r in sorted(self.rungs):
            p, j, q, lab = self.rungs[r]
            key = (j, self.coset_key(j, q))
            if key in groups:
                r1 = groups[key]
                p1, _, q1, l1 = self.rungs[r1]
                diff = tuple(a - b for a, b in zip(q, q1))
                k, ell = self.split_e1(j, diff)
                del self.rungs[r]
                w, mu = self.read_zpow(p1, k, lazy=True, origin=self.vorigin.get(p1, "core"))
                nu = mul(lab, self.lam(j, ell), inv(l1), mu)
                self.merge(p, w, nu)
                return True
            groups[key] = r
        return False

    def _fold_degrees(self):
        """Free and torus degrees of each glued line must agree."""
        for r in sorted(self.rungs):
            p, j, q, lab = self.rungs[r]
            pts, period, cyc = self.zline(p)
            D = self.e1_order(j)
            if period != INFINITE:
                big = tuple(period * a for a in self.e1())
                if D == INFINITE or period % D:
                    self.add_lattice(j, [(big, mul(inv(lab), cyc, lab))])
                    return True
            if D != INFINITE and (period == INFINITE or period != D):
                w, mu = self.read_zpow(p, D, lazy=True, origin=self.vorigin.get(p, "core"))
                big = self.lam(j, tuple(D * a for a in self.e1()))
                nu = mul(inv(mu), lab, big, inv(lab))
                self.merge(w, p, nu)
                return True
        return False

    # ------------------------------------------------------------- builders
    def add_path(self, w, start=None, origin="core"):
        """Fresh path spelling w from start; returns end vertex (c(end) = c(start) w)."""
        v = self.base if start is None else start
        for x, s in w:
            if self.level and x in self.tletters:
                vec = [0] * self.m
                vec[1 + self.tletters.index(x)] = s
                j = self.new_piece(origin)
                self.add_rung(v, j, (0,) * self.m)
                nv = self.new_vertex(origin)
                self.add_rung(nv, j, tuple(vec))
                v = nv
            else:
                nv = self.new_vertex(origin)
                if s > 0:
                    self.add_edge(v, x, nv)
                else:
                    self.add_edge(nv, x, v)
                v = nv
        return v

    def marker(self, name):
        v, lab = self.markers[name]
        r, f = self.resolve(v)
        return r, mul(lab, f)

    # ------------------------------------------------------------ inventory
    def free_components(self):
        comp = {}
        for v in sorted(self.alive):
            if v in comp:
                continue
            c = len(set(comp.values()))
            stack = [v]
            comp[v] = c
            while stack:
                u = stack.pop()
                for x in range(self.rank):
                    for s in (1, -1):
                        r = self.step(u, x, s)
                        if r is not None and r[0] not in comp:
                            comp[r[0]] = c
                            stack.append(r[0])
        return comp

    def free_graph(self, vertices=None):
        """StallingsGraph of the free graph on ``vertices`` (base first if present)."""
        vs = sorted(self.alive if vertices is None else vertices)
        if self.base in vs:
            vs.remove(self.base)
            vs.insert(0, self.base)
        idx = {v: i for i, v in enumerate(vs)}
        out = [-1] * (len(vs) * self.rank)
        inn = [-1] * (len(vs) * self.rank)
        for e, (u, x, v, _) in self.edges.items():
            if u in idx and v in idx:
                out[idx[u] * self.rank + x] = idx[v]
                inn[idx[v] * self.rank + x] = idx[u]
        return st.StallingsGraph(len(vs), self.rank, tuple(out), tuple(inn), 0), vs

    def hanging(self):
        """Hanging elevations: (side, piece, start, degree)."""
        res = []
        if not self.level:
            return res
        comp = self.free_components()
        seen = set()
        for v in sorted(self.alive):
            if v in seen:
                continue
            pts, period, _ = self.zline(v)
            seen.update(w for w, _ in pts.values())
            if self.line_rung(v) is None:
                res.append(("+", ("free", comp[v]), v, period))
        for j in sorted(self.pieces):
            P = self.pieces[j]
            L = P.lattice(self.m)
            if L.full_rank:
                reps = self._coset_reps(j)
            else:
                reps = sorted({self.coset_key(j, q) for q in P.marks})
            attached = {self.coset_key(j, q) for _, jj, q, _ in self.rungs.values() if jj == j}
            for rep in reps:
                key = self.coset_key(j, rep)
                if key not in attached:
                    res.append(("-", ("torus", j), key, self.e1_order(j)))
        return res

    def _coset_reps(self, j):
        L = self.pieces[j].lattice(self.m)
        J = tor.join(L, [self.e1()])
        return sorted({J.reduce(p) for p in _box_of(J)})

    def is_cover(self):
        if self.hanging():
            return False
        for v in self.alive:
            for x in range(self.rank):
                if (v, x) not in self.out:
                    return False
        return all(p.lattice(self.m).full_rank for p in self.pieces.values())

    def underlying_edges(self):
        return [(("free", p), ("torus", j)) for p, j, _, _ in self.rungs.values()]

    # --------------------------------------------------------- connectivity
    def reachable(self, skip_rungs=()):
        """Free vertices and pieces connected to the basepoint."""
        seen_v = {self.base}
        seen_p = set()
        by_piece = {}
        for r, (p, j, _, _) in self.rungs.items():
            if r in skip_rungs:
                continue
            by_piece.setdefault(j, []).append(p)
        rung_of = {}
        for r, (p, j, _, _) in self.rungs.items():
            if r in skip_rungs:
                continue
            rung_of.setdefault(p, []).append(j)
        stack = [("v", self.base)]
        while stack:
            kind, a = stack.pop()
            if kind == "v":
                for x in range(self.rank):
                    for s in (1, -1):
                        r = self.step(a, x, s)
                        if r is not None and r[0] not in seen_v:
                            seen_v.add(r[0])
                            stack.append(("v", r[0]))
                for j in rung_of.get(a, ()):
                    if j not in seen_p:
                        seen_p.add(j)
                        stack.append(("p", j))
            else:
                for p in by_piece.get(a, ()):
                    if p not in seen_v:
                        seen_v.add(p)
                        stack.append(("v", p))
        return seen_v, seen_p

    def collect_garbage(self):
        vs, ps = self.reachable()
        for v in list(self.alive):
            if v not in vs:
                self.alive.discard(v)
        for e in list(self.edges):
            u, x, v, _ = self.edges[e]
            if u not in vs:
                del self.edges[e]
                if self.out.get((u, x)) == e:
                    del self.out[(u, x)]
                if self.inn.get((v, x)) == e:
                    del self.inn[(v, x)]
        for r in list(self.rungs):
            if self.rungs[r][0] not in vs:
                del self.rungs[r]
        for j in list(self.pieces):
            if j not in ps:
                del self.pieces[j]

    # ---------------------------------------------------------- serialising
    def to_json(self):
        names = self.X.alphabet.names
        verts = sorted(self.alive)
        return {
            "level": self.level,
            "free_vertices": verts,
            "edges": [[u, names[x], v, _lab_json(lab)]
                      for u, x, v, lab in sorted(self.edges.values())],
            "torus_pieces": [{"id": j, "lattice": [list(v) for v, _ in P.gens],
                              "lattice_labels": [_lab_json(l) for _, l in P.gens],
                              "origin": P.origin}
                             for j, P in sorted(self.pieces.items())],
            "attachments": [[p, j, list(q), _lab_json(lab)]
                            for r, (p, j, q, lab) in sorted(self.rungs.items())],
            "hanging": [[s, list(pc), (list(a) if isinstance(a, tuple) else a),
                         ("inf" if d == INFINITE else d)]
                        for s, pc, a, d in self.hanging()],
        }

    def to_dot(self):
        names = self.X.alphabet.names
        lines = ["digraph precover {"]
        for v in sorted(self.alive):
            shape = "doublecircle" if v == self.base else "circle"
            lines.append(f'  v{v} [shape={shape}, label="{v}"];')
        for u, x, v, _ in sorted(self.edges.values()):
            lines.append(f'  v{u} -> v{v} [label="{names[x]}"];')
        for j, P in sorted(self.pieces.items()):
            rows = ";".join(",".join(map(str, r)) for r, _ in P.gens) or "0"
            lines.append(f'  T{j} [shape=box, label="T{j} L=[{rows}]"];')
        for r, (p, j, q, _) in sorted(self.rungs.items()):
            lines.append(f'  v{p} -> T{j} [style=dashed, dir=none, '
                         f'label="{",".join(map(str, q))}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _lab_json(lab):
    return [[int(s), int(e)] for s, e in lab]


def _box_of(J):
    """Representatives covering Z^m / J for a full-rank HNF lattice J."""
    m = J.m
    diag = [J.rows[i][i] for i in range(m)]
    return itertools.product(*[range(d) for d in diag])


# ---------------------------------------------------------------------------
# construction


def from_subgroup(X, gens, level=None):
    """Folded core pre-cover of the subgroup generated by ``gens``."""
    P = PreCover(X, len(gens), level)
    for i, h in enumerate(gens):
        h = wd.reduce(h)
        if not h:
            continue
        end = P.add_path(h)
        # c(end) = h as a group element, and symbol i stands for h
        P.merge(end, P.base, ((i, 1),))
    P.fold()
    return P


def add_marked_path(P, name, w):
    """Open path for w from the basepoint, folded in; marker at its end."""
    end = P.add_path(w, origin="core")
    P.markers[name] = (end, ())
    P.fold()
    return P.marker(name)


def membership(X, gens, w, level=None):
    """Decide w in <gens>; returns (bool, witness label word or None)."""
    P = from_subgroup(X, gens, level)
    v, lab = add_marked_path(P, "w", w)
    if v == P.base:
        return True, lab
    return False, None


# ---------------------------------------------------------------------------
# convenience operations


def hanging_elevations(P):
    return P.hanging()


def complete_canonical(P, radius):
    """Grow the canonical completion by ``radius`` layers of pieces."""
    Q = P.copy()
    for _ in range(radius):
        if not Q.level:
            for v in sorted(Q.alive):
                for x in range(Q.rank):
                    for s in (1, -1):
                        if Q.step(v, x, s) is None:
                            Q.free_step(v, x, s, lazy=True)
            continue
        hang = Q.hanging()
        for side, pc, a, d in hang:
            if side == "+":
                Q.ensure_line_rung(a, "canonical completion", marks_box=True)
        for side, pc, a, d in hang:
            if side == "-":
                j = pc[1]
                if Q.coset_rung(j, a) is None:
                    Q.attach_fresh_free(j, a, "canonical completion")
        Q.drain()
    return Q


def stallings_principle(P):
    """Pair hanging elevations by degree (then canonical order)."""
    Q = P.copy()
    hang = Q.hanging()
    plus = {}
    minus = {}
    for side, pc, a, d in hang:
        if d == INFINITE:
            raise PreCoverError("pre-cover is not finite-sheeted")
        (plus if side == "+" else minus).setdefault(d, []).append((pc, a))
    diff = {}
    for d in set(plus) | set(minus):
        k = len(plus.get(d, [])) - len(minus.get(d, []))
        if k:
            diff[d] = k
    if diff:
        raise PreCoverError(f"degree multiset mismatch {dict(sorted(diff.items()))}")
    for d in sorted(plus):
        for (pc1, v), (pc2, q) in zip(plus[d], minus[d]):
            j = pc2[1]
            pts, period, cyc = Q.zline(v)
            big = tuple(d * a for a in Q.e1())
            if Q.pieces[j].aux:
                Q.pieces[j].gens = [(g, cyc if g == big else lab)
                                    for g, lab in Q.pieces[j].gens]
            elif wd.reduce(Q.lam(j, big)) != wd.reduce(cyc):
                pass  # labels only matter for retractions; callers use aux pieces
            Q.add_rung(v, j, q)
    return Q


# ---------------------------------------------------------------------------
# designated hyperbolic elevations


@dataclass
class Trace:
    """Lazily grown elevation of a hyperbolic loop, indexed by syllable pair."""

    name: str
    pairs: list  # [(free word, torus vector)]
    word: tuple  # cyclically reduced loop, starting with a free syllable
    f: dict  # step -> free vertex at the start of the step
    u: dict  # step -> free vertex before the torus move
    lab_f: dict
    lab_u: dict
    fresh: dict  # step -> True when the step only meets this trace's scaffolding
    entry: int = 0
    exit: int = 0
    cut: tuple = None

    @property
    def n(self):
        return len(self.pairs)


def loop_pairs(X, delta):
    """Split a hyperbolic loop: (core word, conjugator, [(free word, vector)])."""
    core, conj = icem.hyperbolic_core(X, 1, delta)
    syls, k = X.from_word(1, core)
    pairs = []
    for i in range(0, len(syls), 2):
        (ka, a), (kb, b) = syls[i], syls[i + 1]
        assert ka == 0 and kb == 1
        pairs.append([X.to_word(0, a), (0,) + tuple(b)])
    last = pairs[-1][1]
    pairs[-1][1] = (last[0] + k,) + last[1:]
    return core, conj, [(a, tuple(b)) for a, b in pairs]


def _tag(P, name, side):
    return f"elevation {name} {side}"


def _step_fresh(P, tr, i):
    u = tr.u.get(i)
    if u is None:
        return False
    side = "fwd" if i >= 0 else "bwd"
    tag = _tag(P, tr.name, side)
    r = P.line_rung(u)
    if r is None or P.vorigin.get(u) != tag:
        return False
    return P.pieces[P.rungs[r[0]][1]].origin == tag


def _forward(P, tr, i):
    """Materialise step i >= 0 (requires f[i])."""
    tag = _tag(P, tr.name, "fwd")
    a, vec = tr.pairs[i % tr.n]
    u, la = P.read(tr.f[i], a, lazy=True, origin=tag)
    tr.u[i] = u
    tr.lab_u[i] = mul(tr.lab_f[i], la)
    w, inc, _ = P.torus_move(u, vec, lazy=True, origin=tag)
    tr.f[i + 1] = w
    tr.lab_f[i + 1] = mul(tr.lab_u[i], inc)


def _backward(P, tr, i):
    """Materialise step i < 0 (requires f[i + 1])."""
    tag = _tag(P, tr.name, "bwd")
    a, vec = tr.pairs[i % tr.n]
    w, inc, _ = P.torus_move(tr.f[i + 1], tuple(-x for x in vec), lazy=True, origin=tag)
    tr.u[i] = w
    tr.lab_u[i] = mul(tr.lab_f[i + 1], inc)
    v, la = P.read(w, inv(a), lazy=True, origin=tag)
    tr.f[i] = v
    tr.lab_f[i] = mul(tr.lab_u[i], la)


def read_pairs(P, v, pairs):
    """Follow one period of a loop given as (free word, torus vector) pairs."""
    lab = ()
    for a, vec in pairs:
        r = P.read(v, a)
        if r is None:
            return None
        v, la = r
        r = P.torus_move(v, vec)
        if r is None:
            return None
        v, inc, _ = r
        lab = mul(lab, la, inc)
    return v, lab


def extend_trace(P, tr, lo, hi):
    i = max(tr.u) + 1 if tr.u else 0
    while i <= hi:
        _forward(P, tr, i)
        i += 1
    i = min(tr.u) - 1 if tr.u and min(tr.u) < 0 else -1
    while i >= lo:
        _backward(P, tr, i)
        i -= 1
    for j in tr.u:
        tr.fresh[j] = _step_fresh(P, tr, j)


def make_disparate(P, elevations, margin=None):
    """Grow scaffolding around each designated elevation.

    ``elevations``: list of (name, marker name, pairs, core word).  Each trace is
    extended until it has spent ``margin`` consecutive steps in scaffolding of
    its own on both sides.
    """
    Q = P.copy()
    traces = []
    for name, mk, pairs, word in elevations:
        s, lab = Q.marker(mk)
        tr = Trace(name, list(pairs), word, {0: s}, {}, {0: ()}, {}, {})
        n = tr.n
        k = margin if margin is not None else icem.ACYLINDRICITY + 2 * n + 1
        hi = lo = 0
        extend_trace(Q, tr, -1, 0)
        while True:
            stale = [i for i in tr.u if i >= 0 and not tr.fresh[i]]
            last = max(stale) if stale else -1
            if hi - last >= k:
                break
            hi += 1
            extend_trace(Q, tr, lo - 1, hi)
            if hi > 100000:
                raise icem.GuardrailError("elevation trace does not leave the core")
        while True:
            stale = [i for i in tr.u if i < 0 and not tr.fresh[i]]
            first = min(stale) if stale else 0
            if first - lo >= k:
                break
            lo -= 1
            extend_trace(Q, tr, lo, hi)
            if lo < -100000:
                raise icem.GuardrailError("elevation trace does not leave the core")
        stale = [i for i in tr.u if not tr.fresh[i]]
        tr.entry = min(stale) if stale else 0
        tr.exit = max(stale) if stale else 0
        for other in traces:
            if other.word == tr.word:
                for i, v in other.f.items():
                    if i % other.n == 0 and v == s:
                        raise DisparityError(
                            f"elevations {other.name} and {name} are isomorphic "
                            "(same double coset)")
        traces.append(tr)
    for a, b in itertools.combinations(traces, 2):
        shared = {a.u[i] for i in a.u if a.fresh[i]} & {b.u[i] for i in b.u if b.fresh[i]}
        if shared:
            raise DisparityError(f"elevations {a.name} and {b.name} share scaffolding")
    return Q, traces


def _cut_data(P, tr, a, b):
    ra = P.line_rung(tr.u[a])
    rb = P.line_rung(tr.u[b])
    if ra is None or rb is None or ra[0] == rb[0]:
        return None
    rid_a, k_a, mu_a = ra
    p_a, T_a, q_a, lam_a = P.rungs[rid_a]
    x_a = tuple(x + k_a * y for x, y in zip(q_a, P.e1()))
    if P.e1_order(T_a) != INFINITE:
        return None
    if P.zline(tr.u[b])[1] != INFINITE:
        return None
    Mp = mul(inv(lam_a), mu_a, inv(tr.lab_u[a]), tr.lab_u[b])
    return rid_a, rb[0], T_a, x_a, Mp, P.rungs[rb[0]][1]


def _cuts_valid(P, plan, old_v, old_p):
    skip = set()
    for tr, a, b, data in plan:
        if data is None:
            return False
        skip |= {data[0], data[1]}
    if len(skip) != 2 * len(plan):
        return False
    vs, ps = P.reachable(skip)
    for tr, a, b, (ra, rb, T_a, x_a, Mp, T_b) in plan:
        if tr.u[a] in vs or T_b in ps or T_a not in ps or tr.u[b] not in vs:
            return False
    return old_v <= vs and old_p <= ps


def fullness_threshold(P, traces, old, cap=64):
    """Per trace: (cut a, least degree d) for which the cut is valid."""
    old_v, old_p = old
    out = []
    for tr in traces:
        found = None
        for a in range(tr.entry, tr.entry - 3 * tr.n - 4, -1):
            extend_trace(P, tr, a, tr.exit)
            for d in range(1, cap + 1):
                b = a + d * tr.n
                if b <= tr.exit:
                    continue
                extend_trace(P, tr, a, b)
                data = _cut_data(P, tr, a, b)
                if _cuts_valid(P, [(tr, a, b, data)], old_v, old_p):
                    found = (a, d)
                    break
            if found:
                break
        if found is None:
            raise icem.GuardrailError(f"no valid cut for elevation {tr.name}")
        out.append(found)
    return out


def make_full(P, traces, cuts, degrees, old):
    """Close each traced arc into a circle of the requested degree.

    ``cuts`` gives the backward cut step for each trace.  The cut rungs are
    removed, the end of the arc is glued to the torus line met at the start,
    and a fresh symbol labels the new loop.  Returns (pre-cover, new symbols).
    """
    Q = P
    plan = []
    for tr, a, d in zip(traces, cuts, degrees):
        b = a + d * tr.n
        extend_trace(Q, tr, a, b)
        plan.append((tr, a, b, _cut_data(Q, tr, a, b)))
    if not _cuts_valid(Q, plan, *old):
        raise DisparityError("cut positions are not in private scaffolding")
    ys = []
    for tr, a, b, (ra, rb, T_a, x_a, Mp, T_b) in plan:
        y = ((Q.nsym + Q.nY, 1),)
        Q.nY += 1
        ys.append(y[0][0])
        del Q.rungs[ra]
        del Q.rungs[rb]
        Q.add_rung(tr.u[b], T_a, x_a, mul(y, inv(Mp)))
        tr.cut = (a, b)
    Q.collect_garbage()
    for tr, a, b, _ in plan:
        d = (b - a) // tr.n
        s = tr.f[0]
        v = s
        for i in range(1, d + 1):
            r = read_pairs(Q, v, tr.pairs)
            if r is None:
                raise PreCoverError(f"elevation {tr.name} did not close")
            v = r[0]
            if v == s and i < d:
                raise PreCoverError(f"elevation {tr.name} closed early")
        if v != s:
            raise PreCoverError(f"elevation {tr.name} did not close")
    return Q, ys
