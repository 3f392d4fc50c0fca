"""Tame covers, separability certificates, retractions and double cosets.

Pipeline (level 1): folded core, scaffolding around designated elevations,
closing them into circles of degree d, making every piece finite, then filling
in the remaining hanging elevations with auxiliary pieces.  Level 0 uses the
line closures and completions from ``hall`` directly.

Certificates are plain JSON: a permutation representation of the group on the
cosets of the cover subgroup K, plus a cocycle assigning an H-word to every
(point, letter).  The retraction K -> H multiplies the cocycle along a loop.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from artifact import hall
from artifact import ice as icem
from artifact import precover as pc
from artifact import torus as tor
from artifact import words as wd

FORMAT = "artifact-cover/1"
INFINITE = math.inf
mul = wd.mul
inv = wd.inverse


class MemberError(ValueError):
    """The element lies in the subgroup (a mathematical negative)."""


class RequestError(ValueError):
    pass


@dataclass
class TameRequest:
    X: object
    level: int
    gens: list
    loops: list = field(default_factory=list)  # [(loop word, [conjugator words])]
    d: int = None  # None: use the computed threshold
    paths: list = field(default_factory=list)  # extra words whose lifts must embed
    allow_unverified: bool = False


@dataclass
class CoverCertificate:
    data: dict
    index: int
    threshold: int

    def to_json(self):
        return self.data


# ---------------------------------------------------------------------------
# helpers


def _strip(w, nsym):
    return wd.reduce([(s, e) for s, e in w if s < nsym])


def _e(m, i, k=1):
    return tuple(k if j == i else 0 for j in range(m))


def _hall_complete(Q, verts):
    """Close the free letters on ``verts`` into permutations, labelling new
    edges so that loops through them are trivial relative to a spanning tree."""
    verts = sorted(verts, key=lambda v: (v != Q.base, v))
    phi = {verts[0]: ()}
    order = [verts[0]]
    for v in order:
        for x in range(Q.rank):
            for s in (1, -1):
                r = Q.step(v, x, s)
                if r is not None and r[0] not in phi:
                    phi[r[0]] = mul(phi[v], r[1])
                    order.append(r[0])
    assert set(phi) == set(verts), "piece is not connected"
    for x in range(Q.rank):
        need_out = [v for v in verts if (v, x) not in Q.out]
        need_in = [v for v in verts if (v, x) not in Q.inn]
        assert len(need_out) == len(need_in)
        for u, v in zip(need_out, need_in):
            Q.add_edge(u, x, v, mul(inv(phi[u]), phi[v]))
    Q.drain()


def _apply_closure(Q, vs, res, words, origin):
    """Copy a successful line closure back into the labelled pre-cover."""
    closed = res.closed
    gid = {}
    for i, v in enumerate(vs):
        gid[res.to_closed[res.to_union[i]]] = v
    for c in range(closed.n):
        if c not in gid:
            gid[c] = Q.new_vertex(origin)
    ident = set(res.ident_edges)
    for u, x, v in closed.edges():
        if (u, x, v) in ident:
            continue
        gu, gv = gid[u], gid[v]
        if (gu, x) in Q.out:
            continue
        Q.add_edge(gu, x, gv)
    Q.drain()
    for j, (u, x, v) in enumerate(res.ident_edges):
        a = gid[res.arcs[j][0]]
        r = Q.read_free(a, res.arc_words[j])
        assert r is not None and r[0] == gid[res.arcs[j][-1]]
        q = r[1]
        # the closing letter is traversed forwards iff its sign is positive
        Q.add_edge(gid[u], x, gid[v], inv(q) if words[j][-1][1] > 0 else q)
    Q.drain()
    return gid


def _attached_lines(Q, comp_vs):
    lines = []
    for r, (p, j, q, lab) in sorted(Q.rungs.items()):
        if p in comp_vs and Q.zline(p)[1] == INFINITE:
            lines.append((p, j))
    return lines


# ---------------------------------------------------------------------------
# finitize / complete


def finitize(Q, explicit_lines=(), max_degree=256, degree=1):
    """Make every piece finite.

    Level 1: every glued line of infinite degree is closed with a per-torus-piece
    degree, torus pieces get full-rank lattices.  ``explicit_lines`` (level 0)
    is a list of (vertex, cyclic word, degree) lines closed with trivial
    retraction image.  Mutates and returns ``Q`` plus a report.
    """
    comp = Q.free_components()
    comps = {}
    for v, c in comp.items():
        comps.setdefault(c, set()).add(v)
    deg = {j: degree for j in Q.pieces}
    report = {"piece_degrees": {}, "periods": {}}
    while True:
        plans = []
        bump = set()
        for c in sorted(comps):
            vs_set = comps[c]
            graph, vs = Q.free_graph(vs_set)
            idx = {v: i for i, v in enumerate(vs)}
            lines, degs, owners = [], [], []
            for p, j in _attached_lines(Q, vs_set) if Q.level else []:
                lines.append((idx[p], Q.z))
                degs.append(deg[j])
                owners.append(j)
            for p, w, d in explicit_lines:
                if p in vs_set:
                    lines.append((idx[p], w))
                    degs.append(d)
                    owners.append(None)
            if not lines:
                plans.append((vs, None, None))
                continue
            res = hall._try_close(graph, lines, degs)
            if res is None:
                if all(o is None for o in owners):
                    thr = hall.closure_threshold(graph, lines)
                    raise hall.ThresholdError("degree below threshold", thr)
                bump |= {o for o in owners if o is not None}
            plans.append((vs, res, [w for _, w in lines]))
        if not bump:
            break
        for j in bump:
            deg[j] += 1
            if deg[j] > max_degree:
                raise icem.GuardrailError("line closure degree cap exceeded")
    for vs, res, words in plans:
        if res is not None:
            _apply_closure(Q, vs, res, words, "finitize: line closure")
    for c in sorted(comps):
        verts = set()
        stack = [min(comps[c], key=lambda v: (v != Q.base, v))]
        verts.add(stack[0])
        while stack:
            u = stack.pop()
            for x in range(Q.rank):
                for s in (1, -1):
                    r = Q.step(u, x, s)
                    if r is not None and r[0] not in verts:
                        verts.add(r[0])
                        stack.append(r[0])
        _hall_complete(Q, verts)
    if Q.level:
        for j in sorted(Q.pieces):
            _finite_torus(Q, j, deg[j], report)
            report["piece_degrees"][j] = deg[j]
    return Q, report


def _finite_torus(Q, j, d, report):
    P = Q.pieces[j]
    m = Q.m
    L = P.lattice(m)
    if L.full_rank:
        return
    e1 = _e(m, 0)
    offsets = sorted({q for p, jj, q, _ in Q.rungs.values() if jj == j})
    if not tor.in_span(L, e1):
        N = tor.period_threshold(L, offsets, e1)
        tt = tor.torus_tame(L, offsets, e1, d, period=N)
        P.gens = [(row, Q.lam(j, tt.project(row))) for row in tt.lattice.rows]
        report["periods"][j] = N
        return
    W = tor._complement(L, e1)
    for N in range(1, 4096):
        extra = [tuple(N * a for a in w) for w in W]
        Lh = tor.join(L, extra)
        J = tor.join(Lh, [e1])
        keys = [J.reduce(q) for q in offsets]
        if len(set(keys)) == len(keys):
            break
    else:
        raise icem.GuardrailError("no period found for torus piece")
    basis = list(L.rows) + extra
    gens = []
    for row in Lh.rows:
        c = tor.solve(tor.Lattice(m, tuple(basis)), row)
        proj = [0] * m
        for ci, b in zip(c[:L.rank], L.rows):
            proj = [x + ci * y for x, y in zip(proj, b)]
        gens.append((row, Q.lam(j, tuple(proj))))
    P.gens = gens
    report["periods"][j] = N


def complete(Q):
    """Attach auxiliary pieces along hanging elevations; returns a cover."""
    if not Q.level:
        return Q, []
    log = []
    for side, pc_, key, D in Q.hanging():
        if side != "-":
            continue
        j = pc_[1]
        p0 = Q.new_vertex("complete: free auxiliary")
        Q.add_rung(p0, j, key)
        big = Q.lam(j, tuple(D * a for a in Q.e1()))
        Q._zcycle(p0, D, big, "complete: free auxiliary")
        verts = _component(Q, p0)
        _hall_complete(Q, verts)
        log.append(("free auxiliary", j, D))
    counts = {}
    for side, pc_, a, D in Q.hanging():
        if side == "+":
            counts[D] = counts.get(D, 0) + 1
    for D in sorted(counts):
        for _ in range(counts[D]):
            gens = [(_e(Q.m, 0, D), ())] + [(_e(Q.m, i), ()) for i in range(1, Q.m)]
            Q.new_piece("complete: torus auxiliary", gens, [(0,) * Q.m], aux=True)
            log.append(("torus auxiliary", D))
    R = pc.stallings_principle(Q)
    assert R.is_cover(), "completion did not produce a cover"
    return R, log


def _component(Q, v):
    seen = {v}
    stack = [v]
    while stack:
        u = stack.pop()
        for x in range(Q.rank):
            for s in (1, -1):
                r = Q.step(u, x, s)
                if r is not None and r[0] not in seen:
                    seen.add(r[0])
                    stack.append(r[0])
    return seen


# ---------------------------------------------------------------------------
# certificates


def _letter_move(Q, v, x, s):
    if Q.level and x in Q.tletters:
        vec = [0] * Q.m
        vec[1 + Q.tletters.index(x)] = s
        r = Q.torus_move(v, tuple(vec))
        return None if r is None else (r[0], r[1])
    return Q.step(v, x, s)


def _lab_json(w):
    return [[int(s), int(e)] for s, e in w]


def build_certificate(Q, X, level, gens, *, core_vertices, kind, extra=None):
    """Permutation representation + cocycle for a cover-flagged pre-cover."""
    A = X.alphabet
    letters = list(range(A.size)) if level else list(range(X.base_rank))
    order = [Q.base]
    pos = {Q.base: 0}
    for v in order:
        for x in letters:
            for s in (1, -1):
                r = _letter_move(Q, v, x, s)
                if r is None:
                    raise AssertionError("structure is not a cover")
                if r[0] not in pos:
                    pos[r[0]] = len(order)
                    order.append(r[0])
    N = len(order)
    perms = {}
    cocycle = {}
    for x in letters:
        img, lab = [], []
        for v in order:
            w, f = _letter_move(Q, v, x, 1)
            img.append(pos[w])
            lab.append(_lab_json(_strip(f, Q.nsym)))
        perms[A.names[x]] = img
        cocycle[A.names[x]] = lab
    tree = _bfs_tree(N, perms, [A.names[x] for x in letters])
    basis = _basis(N, perms, cocycle, tree, [A.names[x] for x in letters], len(gens))
    emb = {}
    for v in sorted(core_vertices):
        r, _ = Q.resolve(v)
        if r in pos:
            emb[str(v)] = pos[r]
    core_edges = []
    for v in sorted(core_vertices):
        for x in range(Q.rank):
            e = Q.out.get((v, x))
            if e is not None and Q.edges[e][2] in core_vertices:
                core_edges.append([v, A.names[x], Q.edges[e][2]])
    pieces = {"free": [], "torus": []}
    comp = {}
    for v in order:
        if v in comp:
            continue
        c = _component(Q, v)
        for u in c:
            comp[u] = len(pieces["free"])
        pieces["free"].append(sorted(pos[u] for u in c))
    attachments = []
    if level:
        for j in sorted(Q.pieces):
            P = Q.pieces[j]
            L = P.lattice(Q.m)
            table = []
            for rep in _lattice_reps(L):
                r = Q.coset_rung(j, rep)
                rid, k, ell = r
                p = Q.rungs[rid][0]
                w, _ = Q.read_zpow(p, k)
                table.append([list(rep), pos[w]])
            pieces["torus"].append({"lattice": [list(r) for r in L.rows],
                                    "points": table, "origin": P.origin})
        for r, (p, j, q, lab) in sorted(Q.rungs.items()):
            attachments.append([pos[p], sorted(Q.pieces).index(j), list(q)])
    data = {
        "format": FORMAT,
        "kind": kind,
        "space": X.to_script(),
        "level": level,
        "subgroup": [A.format(g) for g in gens],
        "index": N,
        "cover": {"points": N, "basepoint": 0, "permutations": perms,
                  "pieces": pieces, "attachments": attachments},
        "retraction": {"cocycle": cocycle,
                       "tree": [[p, None if e is None else [e[0], e[1]]]
                                for p, e in enumerate(tree)],
                       "basis": basis},
        "embedding": {"vertices": emb, "edges": core_edges},
    }
    data.update(extra or {})
    return data


def _bfs_tree(N, perms, names):
    parent = [None] * N
    seen = [False] * N
    seen[0] = True
    order = [0]
    for p in order:
        for x in names:
            q = perms[x][p]
            if not seen[q]:
                seen[q] = True
                parent[q] = (p, x)
                order.append(q)
    return parent


def _basis(N, perms, cocycle, tree, names, nsym):
    """Declared retraction of every non-tree edge loop."""
    pot = [None] * N
    pot[0] = ()
    order = [0]
    kids = {}
    for q, e in enumerate(tree):
        if e is not None:
            kids.setdefault(e[0], []).append((q, e[1]))
    for p in order:
        for q, x in kids.get(p, []):
            pot[q] = mul(pot[p], _from_json(cocycle[x][p]))
            order.append(q)
    tedges = {(e[0], e[1]) for e in tree if e is not None}
    out = []
    for x in names:
        for p in range(N):
            if (p, x) in tedges:
                continue
            q = perms[x][p]
            val = mul(pot[p], _from_json(cocycle[x][p]), inv(pot[q]))
            out.append([p, x, _lab_json(val)])
    return out


def _from_json(w):
    return tuple((int(s), int(e)) for s, e in w)


def _lattice_reps(L):
    diag = [L.rows[i][i] for i in range(L.m)]
    return [tuple(r) for r in itertools.product(*[range(d) for d in diag])]


# ---------------------------------------------------------------------------
# pipeline


def _check_gens(X, level, gens):
    for g in gens:
        X.check_word(level, g)


def _check_level(X, level):
    if level != X.top:
        raise RequestError(f"space has level {X.top}, request says {level}")
    if level > 1:
        raise icem.GuardrailError("tame covers are implemented for levels 0 and 1")


def _loops_level1(X, loops, allow_unverified):
    words = [w for w, _ in loops]
    for w in words:
        nf = icem.normal_form(X, 1, w)
        if not nf.hyperbolic:
            raise hall.HypothesisError("elliptic loops are not supported at level 1")
        if not icem.is_maximal_abelian_generator(X, 1, w):
            raise hall.HypothesisError("loop does not generate a maximal abelian subgroup")
    if len(words) > 1:
        icem.independent(X, 1, words, allow_unverified=allow_unverified)


def tame_cover(req):
    """Build a certified cover for ``req``; see ``TameRequest``."""
    X, level = req.X, req.level
    _check_level(X, level)
    _check_gens(X, level, req.gens)
    for w in req.paths:
        X.check_word(level, w)
    for w, cs in req.loops:
        X.check_word(level, w)
        for c in cs:
            X.check_word(level, c)
    if level == 0:
        return _tame_level0(req)
    return _tame_level1(req)


def _provenance(Q):
    seen = {}
    for v in sorted(Q.alive):
        seen[Q.vorigin.get(v, "core")] = seen.get(Q.vorigin.get(v, "core"), 0) + 1
    tor_ = {}
    for P in Q.pieces.values():
        tor_[P.origin] = tor_.get(P.origin, 0) + 1
    return {"free_vertices": dict(sorted(seen.items())),
            "torus_pieces": dict(sorted(tor_.items()))}


def _tame_level0(req):
    X = req.X
    hall._check_loops(req.loops) if req.loops else None
    Q = pc.PreCover(X, len(req.gens), 0)
    for i, h in enumerate(req.gens):
        if h:
            Q.merge(Q.add_path(h), Q.base, ((i, 1),))
    Q.fold()
    marks = []
    for li, (gamma, cs) in enumerate(req.loops):
        cw = wd.cyclic_reduce(gamma)
        for ci, g in enumerate(cs):
            name = f"elevation {li}.{ci}"
            v, _ = pc.add_marked_path(Q, name, mul(g, cw.witness))
            marks.append((name, cw.word, gamma, g))
    for i, w in enumerate(req.paths):
        pc.add_marked_path(Q, f"path {i}", w)
    core_vertices = set(Q.alive)
    starts = [(Q.marker(name)[0], w) for name, w, _, _ in marks]
    graph, vs = Q.free_graph()
    idx = {v: i for i, v in enumerate(vs)}
    glines = [(idx[v], w) for v, w in starts]
    for p, w in glines:
        if hall._line(graph, p, w) is None:
            raise hall.HypothesisError("a conjugate meets the subgroup nontrivially")
    hall.check_distinct(graph, glines)
    threshold = hall.closure_threshold(graph, glines) if glines else 1
    d = threshold if req.d is None else req.d
    if d < threshold:
        raise hall.ThresholdError("degree below threshold", threshold)
    Q, rep = finitize(Q, [(v, w, d) for v, w in starts])
    Q, _ = complete(Q)
    elevations = [{"loop": X.alphabet.format(gamma), "conjugator": X.alphabet.format(g),
                   "degree": d} for _, _, gamma, g in marks]
    data = build_certificate(Q, X, 0, req.gens, core_vertices=core_vertices,
                             kind="tame", extra={
                                 "loops": [{"loop": X.alphabet.format(gm),
                                            "conjugators": [X.alphabet.format(c) for c in cs]}
                                           for gm, cs in req.loops],
                                 "d": d,
                                 "witnesses": {"elevations": elevations},
                                 "thresholds": {"degree": threshold},
                                 "provenance": _provenance(Q)})
    return CoverCertificate(data, data["index"], threshold)


def _tame_level1(req):
    X = req.X
    if req.loops:
        _loops_level1(X, req.loops, req.allow_unverified)
    P = pc.from_subgroup(X, req.gens, 1)
    traces_in = []
    marks = []
    for li, (delta, cs) in enumerate(req.loops):
        core, conj, pairs = pc.loop_pairs(X, delta)
        for ci, g in enumerate(cs):
            name = f"elevation {li}.{ci}"
            pc.add_marked_path(P, name, mul(g, conj))
            traces_in.append((name, name, pairs, core))
            marks.append((name, delta, g, pairs))
    for i, w in enumerate(req.paths):
        pc.add_marked_path(P, f"path {i}", w)
    for name, _, g, pairs in marks:
        s, _ = P.marker(name)
        # an elevation of finite degree is not designated
        v = s
        for k in range(1, len(P.alive) + 2):
            r = pc.read_pairs(P, v, pairs)
            if r is None:
                break
            v = r[0]
            if v == s:
                raise hall.HypothesisError(
                    f"{name}: elevation has finite degree {k} in the core")
    core_vertices = set(P.alive)
    old = (set(P.alive), set(P.pieces))
    threshold = 1
    if traces_in:
        Q, traces = pc.make_disparate(P, traces_in)
        found = pc.fullness_threshold(Q, traces, old)
        threshold = max(dm for _, dm in found)
        d = threshold if req.d is None else req.d
        if d < threshold:
            raise hall.ThresholdError("degree below threshold", threshold)
        Q, ys = pc.make_full(Q, traces, [a for a, _ in found], [d] * len(traces), old)
    else:
        Q = P.copy()
        d = req.d
    Q, rep = finitize(Q)
    Q, log = complete(Q)
    elevations = [{"loop": X.alphabet.format(delta), "conjugator": X.alphabet.format(g),
                   "degree": d} for _, delta, g, _ in marks]
    data = build_certificate(Q, X, 1, req.gens, core_vertices=core_vertices,
                             kind="tame", extra={
                                 "loops": [{"loop": X.alphabet.format(dl),
                                            "conjugators": [X.alphabet.format(c) for c in cs]}
                                           for dl, cs in req.loops],
                                 "d": d,
                                 "witnesses": {"elevations": elevations},
                                 "thresholds": {"degree": threshold,
                                                "piece_degrees": sorted(rep["piece_degrees"].values()),
                                                "periods": sorted(rep["periods"].values())},
                                 "provenance": _provenance(Q)})
    return CoverCertificate(data, data["index"], threshold)


def member(X, level, gens, w):
    """(in subgroup?, witness H-word as generator indices)."""
    _check_level(X, level)
    _check_gens(X, level, gens)
    X.check_word(level, w)
    return pc.membership(X, gens, w, level)


def separate(X, level, gens, g):
    ok, _ = member(X, level, gens, g)
    if ok:
        raise MemberError("element lies in subgroup")
    cert = tame_cover(TameRequest(X, level, gens, paths=[g]))
    perms = cert.data["cover"]["permutations"]
    end = _lift(perms, X.alphabet, g)
    cert.data["kind"] = "separate"
    cert.data["witnesses"] = {"g": X.alphabet.format(g), "endpoint": end}
    return cert


def virtual_retract(X, level, gens):
    cert = tame_cover(TameRequest(X, level, gens))
    cert.data["kind"] = "retract"
    cert.data["witnesses"] = {}
    return cert


def _lift(perms, A, w, start=0):
    p = start
    for x, s in w:
        img = perms[A.names[x]]
        p = img[p] if s > 0 else img.index(p)
    return p


# ---------------------------------------------------------------------------
# double cosets


VERTEX_GROUPS = ("A", "B", "C")


def _piece_key(Q, v, which):
    if which == "A":
        return ("free", Q.free_components()[v])
    if which == "C":
        pts, _, _ = Q.zline(v)
        return ("line", min(w for w, _ in pts.values()))
    rid, _, _ = Q.ensure_line_rung(v, "double coset")
    return ("torus", Q.rungs[rid][1])


def double_coset_equal(X, which, gens, g, h):
    """Decide H g H' = H h H' where H is the group named by ``which``."""
    if X.top != 1:
        raise RequestError("double cosets need a level-1 space (a splitting)")
    if which not in VERTEX_GROUPS:
        raise RequestError("H must be A (free vertex), B (torus vertex) or C (edge)")
    P = pc.from_subgroup(X, gens, 1)
    pc.add_marked_path(P, "g", inv(g))
    pc.add_marked_path(P, "h", inv(h))
    vg, _ = P.marker("g")
    vh, _ = P.marker("h")
    kg = _piece_key(P, vg, which)
    vh, _ = P.marker("h")
    kh = _piece_key(P, vh, which)
    return kg == kh


def separate_double_coset(X, level, which, gens, g, h):
    """"equal" or a certificate in which the two double cosets stay apart."""
    _check_level(X, level)
    _check_gens(X, level, gens)
    X.check_word(level, g)
    X.check_word(level, h)
    if double_coset_equal(X, which, gens, g, h):
        return "equal"
    cert = tame_cover(TameRequest(X, level, gens, paths=[inv(g), inv(h)]))
    perms = cert.data["cover"]["permutations"]
    A = X.alphabet
    cert.data["kind"] = "doublecoset"
    cert.data["witnesses"] = {"group": which, "g": A.format(g), "h": A.format(h),
                              "points": [_lift(perms, A, inv(g)), _lift(perms, A, inv(h))]}
    return cert
