"""Subgroup graphs of free groups: folding, membership, index, loop elevations."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from artifact import _backend
from artifact.words import CyclicWord, cyclic_reduce, default_names, inverse, mul

INFINITE = math.inf


@dataclass(frozen=True)
class Digraph:
    """An arbitrary (unfolded) basepointed labeled digraph."""

    n: int
    rank: int
    edges: tuple  # (source, letter, target)
    base: int = 0


@dataclass(frozen=True)
class StallingsGraph:
    """Folded basepointed graph; vertices are ``0..n-1`` in canonical BFS order.

    ``out[v * rank + x]`` is the target of the ``x``-edge leaving ``v`` (or -1),
    ``inn`` the source of the ``x``-edge entering ``v``.
    """

    n: int
    rank: int
    out: tuple
    inn: tuple
    base: int = 0

    def step(self, v, x, s):
        if v < 0:
            return -1
        return (self.out if s > 0 else self.inn)[v * self.rank + x]

    def read(self, w, start=None):
        """End vertex of the path spelling ``w``, or -1 if it leaves the graph."""
        v = self.base if start is None else start
        for x, s in w:
            v = (self.out if s > 0 else self.inn)[v * self.rank + x]
            if v < 0:
                return -1
        return v

    def edges(self):
        r = self.rank
        return [(v, x, self.out[v * r + x]) for v in range(self.n)
                for x in range(r) if self.out[v * r + x] >= 0]

    @property
    def edge_count(self):
        return sum(1 for t in self.out if t >= 0)

    def degree(self, v):
        r = self.rank
        return sum((self.out[v * r + x] >= 0) + (self.inn[v * r + x] >= 0)
                   for x in range(r))

    @property
    def is_cover(self):
        return all(t >= 0 for t in self.out)

    @property
    def is_core(self):
        return all(v == self.base or self.degree(v) >= 2 for v in range(self.n))

    def rank_pi1(self):
        return self.edge_count - self.n + 1


def _canonical(n, rank, out, inn, base):
    """BFS renumbering from the basepoint, letters in alphabet order."""
    order = {base: 0}
    queue = deque([base])
    seq = [base]
    while queue:
        v = queue.popleft()
        for x in range(rank):
            for tab in (out, inn):
                t = tab[v * rank + x]
                if t >= 0 and t not in order:
                    order[t] = len(seq)
                    seq.append(t)
                    queue.append(t)
    m = len(seq)
    nout = [-1] * (m * rank)
    ninn = [-1] * (m * rank)
    for v in seq:
        i = order[v]
        for x in range(rank):
            t = out[v * rank + x]
            if t >= 0:
                nout[i * rank + x] = order[t]
            t = inn[v * rank + x]
            if t >= 0:
                ninn[i * rank + x] = order[t]
    return StallingsGraph(m, rank, tuple(nout), tuple(ninn), 0), order


def fold(graph):
    """Fold a ``Digraph`` (union-find); keeps the basepoint component."""
    g, _ = fold_with_map(graph)
    return g


def fold_with_map(graph):
    """Fold and also return the map original vertex -> folded vertex (or -1)."""
    root, out, inn = _backend.fold_edges(graph.n, graph.rank, list(graph.edges))
    g, order = _canonical(graph.n, graph.rank, out, inn, root[graph.base])
    vmap = [order.get(root[v], -1) for v in range(graph.n)]
    return g, vmap


def wedge(generators, rank):
    """Rose of paths, one closed path per generator, sharing the basepoint."""
    edges = []
    n = 1
    for w in generators:
        prev = 0
        for i, (x, s) in enumerate(w):
            nxt = 0 if i == len(w) - 1 else n
            if nxt:
                n += 1
            edges.append((prev, x, nxt) if s > 0 else (nxt, x, prev))
            prev = nxt
    return Digraph(n, rank, tuple(edges), 0)


def trim(graph):
    """Remove hanging trees away from the basepoint."""
    r = graph.rank
    out = list(graph.out)
    inn = list(graph.inn)
    deg = [graph.degree(v) for v in range(graph.n)]
    alive = [True] * graph.n
    stack = [v for v in range(graph.n) if v != graph.base and deg[v] <= 1]
    while stack:
        v = stack.pop()
        if not alive[v] or v == graph.base or deg[v] > 1:
            continue
        alive[v] = False
        for x in range(r):
            t = out[v * r + x]
            if t >= 0:
                out[v * r + x] = -1
                inn[t * r + x] = -1
                deg[t] -= 1
                stack.append(t)
            t = inn[v * r + x]
            if t >= 0:
                inn[v * r + x] = -1
                out[t * r + x] = -1
                deg[t] -= 1
                stack.append(t)
    g, _ = _canonical(graph.n, r, out, inn, graph.base)
    return g


def subgroup_graph(generators, rank):
    """Folded core graph whose fundamental group is the generated subgroup."""
    return trim(fold(wedge(generators, rank)))


def membership(graph, w):
    return graph.read(w) == graph.base


def index(graph):
    return graph.n if graph.is_cover else INFINITE


def from_permutations(perms, base=0):
    """Cover graph from one permutation (list) per letter."""
    n = len(perms[0]) if perms else 1
    rank = len(perms)
    edges = [(v, x, p[v]) for x, p in enumerate(perms) for v in range(n)]
    return fold(Digraph(n, rank, tuple(edges), base))


def full_graph(rank):
    return StallingsGraph(1, rank, (0,) * rank, (0,) * rank, 0)


def canonical_form(graph):
    g, _ = _canonical(graph.n, graph.rank, graph.out, graph.inn, graph.base)
    return (g.n, g.rank, g.out)


def isomorphic(g1, g2):
    return canonical_form(g1) == canonical_form(g2)


@dataclass(frozen=True)
class LoopElevation:
    loop: CyclicWord
    start: tuple  # (vertex, phase)
    trace: tuple  # vertices visited, one per letter position
    degree: object  # int or INFINITE
    exits: tuple = ()  # ((vertex, letter, sign) backward, (vertex, letter, sign) forward)

    @property
    def states(self):
        p0 = self.start[1]
        n = len(self.loop.word)
        return tuple((v, (p0 + i) % n) for i, v in enumerate(self.trace))


def elevations_of_loop(graph, loop):
    """Elevations of a closed loop that meet the finite graph.

    States are pairs (vertex, phase); reading the next loop letter is a partial
    injection on states, whose orbits are the elevations.
    """
    if not isinstance(loop, CyclicWord):
        loop = cyclic_reduce(loop)
    w = loop.word
    if not w:
        raise ValueError("trivial loop")
    n = len(w)
    seen = set()
    result = []

    def fwd(state):
        v, i = state
        x, s = w[i]
        t = graph.step(v, x, s)
        return (t, (i + 1) % n) if t >= 0 else None

    def bwd(state):
        v, i = state
        j = (i - 1) % n
        x, s = w[j]
        t = graph.step(v, x, -s)
        return (t, j) if t >= 0 else None

    for i in range(n):
        for v in range(graph.n):
            st = (v, i)
            if st in seen:
                continue
            # walk backwards to the start of the orbit (or around a cycle)
            first = st
            while True:
                p = bwd(first)
                if p is None or p == st:
                    break
                first = p
            orbit = [first]
            nxt = fwd(first)
            while nxt is not None and nxt != first:
                orbit.append(nxt)
                nxt = fwd(nxt)
            seen.update(orbit)
            if nxt == first:
                zero = [s for s in orbit if s[1] == 0]
                start = min(zero)
                k = orbit.index(start)
                orbit = orbit[k:] + orbit[:k]
                result.append(LoopElevation(
                    loop, start, tuple(v for v, _ in orbit), len(orbit) // n))
            else:
                a, b = orbit[0], orbit[-1]
                bx, bs = w[(a[1] - 1) % n]
                fx, fs = w[b[1]]
                result.append(LoopElevation(
                    loop, a, tuple(v for v, _ in orbit), INFINITE,
                    ((a[0], bx, -bs), (b[0], fx, fs))))
    return result


def elevation_at(graph, loop, vertex):
    """The elevation whose trace passes ``vertex`` at phase 0."""
    for e in elevations_of_loop(graph, loop):
        if (vertex, 0) in e.states:
            return e
    raise ValueError("vertex not in graph")


def loop_degree_at(graph, loop, vertex):
    """Degree of the elevation through ``vertex``: least k with loop^k closing."""
    w = loop.word if isinstance(loop, CyclicWord) else loop
    v = vertex
    for k in range(1, graph.n + 1):
        v = graph.read(w, v)
        if v < 0:
            return INFINITE
        if v == vertex:
            return k
    return INFINITE


def to_dot(graph, names=None):
    names = names or default_names(graph.rank)
    lines = ["digraph G {", "  rankdir=LR;"]
    for v in range(graph.n):
        shape = "doublecircle" if v == graph.base else "circle"
        lines.append(f'  v{v} [shape={shape}, label="{v}"];')
    for u, x, v in graph.edges():
        lines.append(f'  v{u} -> v{v} [label="{names[x]}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def word_code_index(w, rank):
    """Position of a reduced word in the enumeration used by ``membership_table``."""
    nc = 2 * rank
    k = len(w)
    off = 1
    layer = 1
    for i in range(k):
        layer = nc if i == 0 else layer * (nc - 1)
        if i < k - 1:
            off += layer
    if k == 0:
        return 0
    idx = 0
    prev = -1
    for i, (x, s) in enumerate(w):
        c = 2 * x + (s < 0)
        if i == 0:
            digit = c
        else:
            forbid = prev ^ 1
            digit = c - (1 if c > forbid else 0)
            idx *= nc - 1
        idx += digit
        prev = c
    return off + idx


def membership_table(graph, max_length):
    """Membership of every reduced word of length <= max_length, as a byte mask."""
    return _backend.read_all(list(graph.out), list(graph.inn), graph.rank,
                             graph.base, max_length)


def path_word(graph, parent_edge, v):
    """Word labelling the tree path from the basepoint to ``v``."""
    out = []
    while v != graph.base:
        u, x, s = parent_edge[v]
        out.append((x, s))
        v = u
    return tuple(reversed(out))


def bfs_tree(graph, prefer=None):
    """Spanning tree: ``parent_edge[v] = (u, letter, sign)`` with ``u -x^s-> v``.

    ``prefer`` is an optional set of (u, x, v) edges explored before the rest.
    """
    r = graph.rank
    parent = {graph.base: None}
    for restrict in ((True, False) if prefer is not None else (False,)):
        queue = deque(sorted(parent))
        while queue:
            v = queue.popleft()
            for x in range(r):
                t = graph.out[v * r + x]
                if t >= 0 and t not in parent and \
                        (not restrict or (v, x, t) in prefer):
                    parent[t] = (v, x, 1)
                    queue.append(t)
                t = graph.inn[v * r + x]
                if t >= 0 and t not in parent and \
                        (not restrict or (t, x, v) in prefer):
                    parent[t] = (v, x, -1)
                    queue.append(t)
    return parent


def schreier_generator(graph, parent, edge):
    """Loop at the basepoint through ``edge`` (u, x, v): path(u) x path(v)^-1."""
    u, x, v = edge
    return mul(path_word(graph, parent, u), ((x, 1),), inverse(path_word(graph, parent, v)))
