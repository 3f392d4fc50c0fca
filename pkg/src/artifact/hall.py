"""Completing folded graphs to finite covers, with retractions.

Also the controlled covers in which chosen infinite lines of a loop are wrapped
into cycles of a prescribed degree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from artifact import stallings as st
from artifact.words import cyclic_reduce, inverse, mul, power


class ThresholdError(ValueError):
    def __init__(self, message, threshold=None):
        super().__init__(message if threshold is None
                         else f"{message} (threshold {threshold})")
        self.threshold = threshold


class HypothesisError(ValueError):
    pass


def close_permutations(n, rank, out, inn):
    """Pair vertices missing an out-edge with vertices missing an in-edge.

    Returns new tables and the list of added edges.  Deficits always match for
    a single letter of a finite graph, so no vertices are ever added.
    """
    out = list(out)
    inn = list(inn)
    added = []
    for x in range(rank):
        need_out = [v for v in range(n) if out[v * rank + x] < 0]
        need_in = [v for v in range(n) if inn[v * rank + x] < 0]
        assert len(need_out) == len(need_in), "padding would be required"
        for u, v in zip(need_out, need_in):
            out[u * rank + x] = v
            inn[v * rank + x] = u
            added.append((u, x, v))
    return out, inn, added


@dataclass
class GraphCoverCertificate:
    cover: st.StallingsGraph
    core: st.StallingsGraph
    embedding: tuple
    tree: dict
    retraction: dict  # non-tree edge (u, x, v) -> word in the core subgroup
    core_edges: frozenset = frozenset()
    designated: list = field(default_factory=list)

    @property
    def index(self):
        return self.cover.n

    def basis(self):
        """Schreier generators of the cover group, keyed by non-tree edge."""
        return {e: st.schreier_generator(self.cover, self.tree, e)
                for e in sorted(self.retraction)}


def _tree_edges(tree):
    out = set()
    for v, pe in tree.items():
        if pe is None:
            continue
        u, x, s = pe
        out.add((u, x, v) if s > 0 else (v, x, u))
    return out


def complete_to_cover(core):
    """Hall completion of a folded graph, retracting onto its fundamental group."""
    out, inn, added = close_permutations(core.n, core.rank, core.out, core.inn)
    cover = st.StallingsGraph(core.n, core.rank, tuple(out), tuple(inn), core.base)
    core_edges = frozenset(core.edges())
    tree = st.bfs_tree(cover, prefer=core_edges)
    tedges = _tree_edges(tree)
    retraction = {}
    for e in cover.edges():
        if e in tedges:
            continue
        retraction[e] = st.schreier_generator(cover, tree, e) if e in core_edges else ()
    return GraphCoverCertificate(cover, core, tuple(range(core.n)), tree,
                                 retraction, core_edges)


def retraction_image(cert, w):
    """Apply the retraction to an element of the cover group."""
    g = cert.cover
    v = g.base
    tedges = _tree_edges(cert.tree)
    parts = []
    for x, s in w:
        t = g.step(v, x, s)
        if t < 0:
            raise ValueError("word not in the cover subgroup")
        e = (v, x, t) if s > 0 else (t, x, v)
        if e not in tedges:
            img = cert.retraction[e]
            parts.append(img if s > 0 else inverse(img))
        v = t
    if v != g.base:
        raise ValueError("word not in the cover subgroup")
    return mul(*parts)


# ---------------------------------------------------------------------------
# wrapping lines into cycles


class _Infeasible(Exception):
    pass


@dataclass
class LineClosure:
    """Result of wrapping designated lines of ``graph`` into degree-d cycles."""

    union: st.StallingsGraph  # graph with all arcs attached (before closing)
    to_union: list  # vertex map graph -> union
    closed: st.StallingsGraph  # after identifying arc ends
    to_closed: list  # vertex map union -> closed (-1 for removed ends)
    ident_edges: list  # closing edges (u, x, v) in closed coordinates
    arcs: list  # per line: closed-graph vertices at positions A..B-1
    arc_words: list  # per line: the word read along the arc (without last letter)
    starts: list  # per line: start vertex in closed coordinates


def _line(graph, p, w):
    """Positions of the line through (p, phase 0): dict pos -> vertex."""
    n = len(w)
    pos = {0: p}
    v, k = p, 0
    while True:
        x, s = w[k % n]
        t = graph.step(v, x, s)
        if t < 0:
            break
        k += 1
        v = t
        if v == p and k % n == 0:
            return None
        pos[k] = v
    v, k = p, 0
    while True:
        x, s = w[(k - 1) % n]
        t = graph.step(v, x, -s)
        if t < 0:
            break
        k -= 1
        v = t
        pos[k] = v
    return pos


def check_distinct(graph, lines):
    """Reject two designated lines that are the same elevation."""
    for i, (p, w) in enumerate(lines):
        pos = _line(graph, p, w)
        on = {v for k, v in pos.items() if k % len(w) == 0}
        for j in range(i + 1, len(lines)):
            if lines[j][1] == w and lines[j][0] in on:
                raise HypothesisError(f"designated elevations {i} and {j} coincide")


def close_lines(graph, lines, degrees, shifts=None):
    """Wrap each designated line (start vertex, cyclic word) into a cycle.

    Raises ``_Infeasible`` when the arc ends collide for these degrees.
    """
    J = len(lines)
    shifts = shifts or [0] * J
    rank = graph.rank
    edges = list(graph.edges())
    nxt = graph.n
    plans = []
    for (p, w), d, m in zip(lines, degrees, shifts):
        n = len(w)
        pos = _line(graph, p, w)
        if pos is None:
            raise HypothesisError("designated line closes up (finite degree)")
        lo, hi = min(pos), max(pos)
        A = n * (lo // n) - m * n
        B = A + d * n
        if B <= hi:
            raise _Infeasible
        ids = {}
        for k in range(A, B + 1):
            if k in pos:
                ids[k] = pos[k]
            else:
                ids[k] = nxt
                nxt += 1
        for k in range(A, B):
            if k in pos and k + 1 in pos:
                continue
            x, s = w[k % n]
            edges.append((ids[k], x, ids[k + 1]) if s > 0 else (ids[k + 1], x, ids[k]))
        plans.append((ids, A, B, w))
    union, umap = st.fold_with_map(st.Digraph(nxt, rank, tuple(edges), graph.base))
    ends = []
    for ids, A, B, w in plans:
        a, b = umap[ids[A]], umap[ids[B]]
        x, s = w[-1]
        if union.degree(b) != 1 or union.step(a, x, -s) >= 0:
            raise _Infeasible
        ends += [a, b]
    if len(set(ends)) != len(ends):
        raise _Infeasible
    # identify b_j with a_j
    bset = {ends[2 * j + 1]: ends[2 * j] for j in range(J)}
    redirected = []
    for u, x, v in union.edges():
        redirected.append((bset.get(u, u), x, bset.get(v, v)))
    closed, cmap = st.fold_with_map(st.Digraph(union.n, rank, tuple(redirected), union.base))
    if closed.n != union.n - J:
        raise _Infeasible
    to_closed = [(-1 if v in bset else cmap[v]) for v in range(union.n)]
    ident, arcs, arc_words, starts = [], [], [], []
    for (ids, A, B, w), j in zip(plans, range(J)):
        n = len(w)
        verts = [cmap[umap[ids[k]]] for k in range(A, B)]
        x, s = w[(B - 1) % n]
        u, a = verts[-1], verts[0]
        ident.append((u, x, a) if s > 0 else (a, x, u))
        arcs.append(verts)
        arc_words.append(power(w, (B - A) // n)[:-1])
        starts.append(verts[-A])
        # the closed line must be a cycle of exactly d copies
        deg = st.loop_degree_at(closed, w, starts[-1])
        if deg != (B - A) // n:
            raise _Infeasible
    return LineClosure(union, [umap[v] for v in range(graph.n)], closed,
                       to_closed, ident, arcs, arc_words, starts)


def closure_threshold(graph, lines, max_degree=256, max_shift=4):
    """Smallest common degree for which ``close_lines`` succeeds."""
    for d in range(1, max_degree + 1):
        if _try_close(graph, lines, d, max_shift) is not None:
            return d
    raise ThresholdError("no feasible degree below the search cap")


def _try_close(graph, lines, d, max_shift=4):
    degrees = d if isinstance(d, (list, tuple)) else [d] * len(lines)
    for m in range(max_shift + 1):
        try:
            return close_lines(graph, lines, degrees, [m] * len(lines))
        except _Infeasible:
            continue
    return None


def _prepare_lines(core, loops):
    """Attach the conjugator paths; return (graph, lines, descriptors)."""
    rank = core.rank
    edges = list(core.edges())
    n = core.n
    starts = []
    descriptors = []
    for gamma, conjugators in loops:
        cw = cyclic_reduce(gamma)
        if not cw.word:
            raise HypothesisError("trivial loop")
        for g in conjugators:
            g2 = mul(g, cw.witness)
            v = core.base
            i = 0
            while i < len(g2):
                x, s = g2[i]
                t = core.step(v, x, s) if v < core.n else -1
                if t < 0:
                    break
                v = t
                i += 1
            for x, s in g2[i:]:
                edges.append((v, x, n) if s > 0 else (n, x, v))
                v = n
                n += 1
            starts.append(v)
            descriptors.append((gamma, g, cw.word, g2))
    graph, vmap = st.fold_with_map(st.Digraph(n, rank, tuple(edges), core.base))
    lines = [(vmap[v], d[2]) for v, d in zip(starts, descriptors)]
    return graph, vmap, lines, descriptors


def _check_loops(loops):
    from artifact.words import independent, root
    gammas = [g for g, _ in loops]
    for g in gammas:
        if root(g)[1] != 1:
            raise HypothesisError("loop is a proper power")
    if not independent(gammas):
        raise HypothesisError("loops are not independent")


def controlled_cover(core, loops, d):
    """Cover in which each conjugate line of each loop closes with degree ``d``.

    ``loops`` is a list of ``(gamma, [g_1, ...])``; the designated element is
    ``g gamma g^-1``.  Returns ``(certificate, report)``.
    """
    _check_loops(loops)
    graph, vmap, lines, desc = _prepare_lines(core, loops)
    for p, w in lines:
        if _line(graph, p, w) is None:
            raise HypothesisError("a conjugate meets the core subgroup nontrivially")
    check_distinct(graph, lines)
    threshold = closure_threshold(graph, lines) if lines else 1
    if d < threshold:
        raise ThresholdError("degree below threshold", threshold)
    res = _try_close(graph, lines, d)
    if res is None:
        raise ThresholdError("line closure failed at this degree", threshold)
    closed = res.closed
    out, inn, added = close_permutations(closed.n, closed.rank, closed.out, closed.inn)
    cover = st.StallingsGraph(closed.n, closed.rank, tuple(out), tuple(inn), closed.base)
    ident = set(res.ident_edges)
    union_edges = set()
    for u, x, v in res.union.edges():
        cu, cv = res.to_closed[u], res.to_closed[v]
        if cu >= 0 and cv >= 0:
            union_edges.add((cu, x, cv))
    union_edges -= ident
    tree = st.bfs_tree(cover, prefer=frozenset(union_edges))
    tedges = _tree_edges(tree)
    retraction = {}
    for e in cover.edges():
        if e in tedges:
            continue
        if e in union_edges:
            retraction[e] = st.schreier_generator(cover, tree, e)
        elif e in ident:
            j = res.ident_edges.index(e)
            a, u = res.arcs[j][0], res.arcs[j][-1]
            q = mul(st.path_word(cover, tree, a), res.arc_words[j],
                    inverse(st.path_word(cover, tree, u)))
            # the cycle crosses e from u to a; backwards when the letter is inverted
            retraction[e] = inverse(q) if e[0] == u else q
        else:
            retraction[e] = ()
    emb = tuple(res.to_closed[res.to_union[vmap[v]]] for v in range(core.n))
    core_edges = frozenset((emb[u], x, emb[v]) for u, x, v in core.edges())
    report = []
    for (gamma, g, w, g2), s in zip(desc, res.starts):
        elem = mul(g2, power(w, d), inverse(g2))
        report.append({"loop": gamma, "conjugator": g, "start": s,
                       "degree": st.loop_degree_at(cover, w, s),
                       "generator": elem})
    cert = GraphCoverCertificate(cover, core, emb, tree, retraction, core_edges,
                                 report)
    return cert, {"threshold": threshold, "elevations": report}
