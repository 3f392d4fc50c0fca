"""Independent checks of certificates and brute-force oracles.

Everything here works from the serialized certificate.  Group equality is
decided by normal forms of the space (the data model); nothing from the cover
construction is imported.
"""

from __future__ import annotations

import copy
import json
import random
from collections import deque

from artifact import ice as icem
from artifact import words as wd


class MalformedCertificate(ValueError):
    pass


# ---------------------------------------------------------------------------
# small independent utilities


def _lift(perms, names, w, start=0):
    """Endpoint of the lift of w, or None if a letter is missing."""
    p = start
    for x, s in w:
        img = perms.get(names[x])
        if img is None:
            return None
        if s > 0:
            p = img[p]
        else:
            try:
                p = img.index(p)
            except ValueError:
                return None
    return p


def _lift_labels(perms, cocycle, names, w, start=0):
    """(endpoint, product of cocycle values along the lift)."""
    p = start
    out = []
    for x, s in w:
        img = perms[names[x]]
        if s > 0:
            out.extend(_word(cocycle[names[x]][p]))
            p = img[p]
        else:
            q = img.index(p)
            out.extend(wd.inverse(_word(cocycle[names[x]][q])))
            p = q
    return p, wd.reduce(out)


def _word(j):
    try:
        return tuple((int(s), int(e)) for s, e in j)
    except (TypeError, ValueError):
        raise MalformedCertificate("bad word encoding") from None


def _hnf_reduce(rows, v):
    v = list(v)
    for i, row in enumerate(rows):
        c = v[i] // row[i]
        v = [a - c * b for a, b in zip(v, row)]
    return tuple(v)


def _is_hnf_full(rows, m):
    if len(rows) != m:
        return False
    for i, row in enumerate(rows):
        if len(row) != m or row[i] <= 0 or any(row[j] for j in range(i)):
            return False
        for k in range(i):
            if not 0 <= rows[k][i] < row[i]:
                return False
    return True


class _Ctx:
    def __init__(self, cert):
        if not isinstance(cert, dict) or cert.get("format") != "artifact-cover/1":
            raise MalformedCertificate("unknown certificate format")
        try:
            self.X = icem.parse_script(cert["space"])
        except (icem.IceError, KeyError) as exc:
            raise MalformedCertificate(f"space: {exc}") from None
        self.level = cert["level"]
        self.A = self.X.alphabet
        self.names = self.A.names
        try:
            self.gens = [self.A.parse(g) for g in cert["subgroup"]]
        except wd.WordError as exc:
            raise MalformedCertificate(f"subgroup: {exc}") from None
        cov = cert["cover"]
        self.N = cov["points"]
        self.perms = cov["permutations"]
        self.cocycle = cert["retraction"]["cocycle"]
        self.letters = list(range(self.A.size)) if self.level else list(range(self.X.base_rank))

    def evaluate(self, hw):
        """Substitute generator words for the symbols of an H-word."""
        out = []
        for s, e in hw:
            if not 0 <= s < len(self.gens) or e not in (1, -1):
                raise MalformedCertificate("retraction value is not an H-word")
            out.extend(self.gens[s] if e > 0 else wd.inverse(self.gens[s]))
        return wd.reduce(out)

    def equal(self, u, w):
        return icem.equal(self.X, self.level, u, w)

    def relators(self):
        if not self.level:
            return []
        ext = self.X.extensions[0]
        z = ext.z
        ts = [((x, 1),) for x in ext.letters]
        rels = []
        comm = lambda u, v: wd.mul(u, v, wd.inverse(u), wd.inverse(v))
        for t in ts:
            rels.append(comm(z, t))
        for t1, t2 in zip(ts, ts[1:]):
            rels.append(comm(t1, t2))
        for i in range(len(ts)):
            for j in range(i + 2, len(ts)):
                rels.append(comm(ts[i], ts[j]))
        return rels


# ---------------------------------------------------------------------------
# checks


def check_cover(cert):
    """Per-condition pass/fail report for the cover structure."""
    rep = {}
    try:
        c = _Ctx(cert)
    except (MalformedCertificate, KeyError, TypeError) as exc:
        return {"wellformed": (False, str(exc))}
    N = c.N
    ok, why = True, ""
    if cert.get("index") != N:
        ok, why = False, "index differs from point count"
    for x in c.letters:
        img = c.perms.get(c.names[x])
        if not isinstance(img, list) or len(img) != N or sorted(img) != list(range(N)):
            ok, why = False, f"letter {c.names[x]} is not a permutation"
            break
    rep["permutations"] = (ok, why)
    if not ok:
        return rep
    seen = {0}
    q = deque([0])
    while q:
        p = q.popleft()
        for x in c.letters:
            for s in (1, -1):
                r = _lift(c.perms, c.names, ((x, s),), p)
                if r not in seen:
                    seen.add(r)
                    q.append(r)
    rep["transitive"] = (len(seen) == N, f"{len(seen)} of {N} points reachable")
    bad = [(p, i) for i, r in enumerate(c.relators()) for p in range(N)
           if _lift(c.perms, c.names, r, p) != p]
    rep["relators"] = (not bad, f"relator failures at {bad[:3]}" if bad else "")
    rep["pieces"] = _check_pieces(c, cert)
    rep["embedding"] = _check_embedding(c, cert)
    return rep


def _check_pieces(c, cert):
    pieces = cert["cover"].get("pieces", {})
    free_names = [c.names[x] for x in range(c.X.base_rank)]
    # free pieces are orbits of the free letters
    orbit = {}
    for p in range(c.N):
        if p in orbit:
            continue
        stack = [p]
        orbit[p] = p
        while stack:
            u = stack.pop()
            for x in free_names:
                img = c.perms[x]
                for v in (img[u], img.index(u)):
                    if v not in orbit:
                        orbit[v] = p
                        stack.append(v)
    declared = pieces.get("free", [])
    got = sorted(sorted(v for v in orbit if orbit[v] == r) for r in set(orbit.values()))
    if sorted(sorted(f) for f in declared) != got:
        return (False, "free pieces are not the free-letter orbits")
    if not c.level:
        return (True, "")
    ext = c.X.extensions[0]
    m = ext.m
    moves = [ext.z] + [((x, 1),) for x in ext.letters]
    covered = []
    tables = []
    for k, T in enumerate(pieces.get("torus", [])):
        rows = [tuple(r) for r in T["lattice"]]
        if not _is_hnf_full(rows, m):
            return (False, f"torus piece {k}: lattice is not full rank HNF")
        size = 1
        for i in range(m):
            size *= rows[i][i]
        table = {}
        for rep_, pt in T["points"]:
            key = _hnf_reduce(rows, rep_)
            if key in table:
                return (False, f"torus piece {k}: duplicate coset")
            table[key] = pt
        if len(table) != size:
            return (False, f"torus piece {k}: {len(table)} points for index {size}")
        for key, pt in table.items():
            for i, mv in enumerate(moves):
                nxt = _hnf_reduce(rows, tuple(a + (j == i) for j, a in enumerate(key)))
                if _lift(c.perms, c.names, mv, pt) != table[nxt]:
                    return (False, f"torus piece {k}: square fails at {list(key)}")
        covered += list(table.values())
        tables.append((rows, table))
    if sorted(covered) != list(range(c.N)):
        return (False, "torus pieces do not partition the points")
    for pt, k, q in cert["cover"].get("attachments", []):
        if not 0 <= k < len(tables):
            return (False, "attachment to unknown piece")
        rows, table = tables[k]
        if table.get(_hnf_reduce(rows, q)) != pt:
            return (False, f"attachment at point {pt} disagrees with piece table")
    return (True, "")


def _check_embedding(c, cert):
    emb = cert.get("embedding", {})
    vmap = {int(k): v for k, v in emb.get("vertices", {}).items()}
    if not vmap:
        return (True, "empty")
    if len(set(vmap.values())) != len(vmap):
        return (False, "embedding is not injective")
    if vmap.get(0, 0) != 0:
        return (False, "basepoint does not map to the basepoint")
    for u, x, v in emb.get("edges", []):
        if u not in vmap or v not in vmap or x not in c.perms:
            return (False, "edge outside the embedded core")
        if c.perms[x][vmap[u]] != vmap[v]:
            return (False, f"edge {u}-{x}->{v} not preserved")
    return (True, "")


def check_separation(cert, gens=None, g=None):
    """H-generator lifts close, the g-lift does not."""
    c = _Ctx(cert)
    A = c.A
    gens = c.gens if gens is None else [A.parse(h) if isinstance(h, str) else h for h in gens]
    if g is None:
        g = cert.get("witnesses", {}).get("g")
        if g is None:
            raise MalformedCertificate("no element to separate")
    g = A.parse(g) if isinstance(g, str) else g
    for h in gens:
        if _lift(c.perms, c.names, h) != 0:
            return False
    end = _lift(c.perms, c.names, g)
    if end is None or end == 0:
        return False
    declared = cert.get("witnesses", {}).get("endpoint")
    if declared is not None and declared != end:
        return False
    # coset action: g moves the basepoint coset, H fixes it
    return True


def check_retraction(cert, report=False):
    """rho(x) in H for basis elements, rho(h) = h, relators map to 1."""
    out = {}
    try:
        c = _Ctx(cert)
        out["tree"] = _check_tree(c, cert)
        out["basis"] = _check_basis(c, cert)
        ok = True
        for i, h in enumerate(c.gens):
            end, lab = _lift_labels(c.perms, c.cocycle, c.names, h)
            if end != 0 or not c.equal(c.evaluate(lab), h):
                ok = False
                break
        out["identity_on_H"] = (ok, "" if ok else f"generator {i}")
        ok = True
        for r in c.relators():
            for p in range(c.N):
                end, lab = _lift_labels(c.perms, c.cocycle, c.names, r, p)
                if end != p or not c.equal(c.evaluate(lab), ()):
                    ok = False
                    break
        out["relators_to_identity"] = (ok, "")
        out["elevations"] = _check_elevations(c, cert)
    except (MalformedCertificate, KeyError, TypeError, IndexError, ValueError) as exc:
        out["wellformed"] = (False, str(exc))
    if report:
        return out
    return all(v[0] for v in out.values())


def _check_tree(c, cert):
    tree = cert["retraction"]["tree"]
    if len(tree) != c.N or tree[0][1] is not None:
        return (False, "tree shape")
    parent = {}
    for p, e in tree:
        if p == 0:
            continue
        if e is None:
            return (False, f"point {p} has no parent")
        u, x = e
        if x not in c.perms or c.perms[x][u] != p:
            return (False, f"tree edge into {p} is not an edge")
        parent[p] = u
    for p in range(1, c.N):
        seen = set()
        u = p
        while u != 0:
            if u in seen or u not in parent:
                return (False, "tree has a cycle")
            seen.add(u)
            u = parent[u]
    return (True, "")


def _check_basis(c, cert):
    ret = cert["retraction"]
    tree = ret["tree"]
    pot = {0: ()}
    kids = {}
    for p, e in tree:
        if e is not None:
            kids.setdefault(e[0], []).append((p, e[1]))
    order = [0]
    for p in order:
        for q, x in kids.get(p, []):
            pot[q] = wd.mul(pot[p], _word(c.cocycle[x][p]))
            order.append(q)
    tedges = {(e[0], e[1]) for _, e in tree if e is not None}
    expect = {}
    for x in c.letters:
        nm = c.names[x]
        for p in range(c.N):
            if (p, nm) in tedges:
                continue
            q = c.perms[nm][p]
            expect[(p, nm)] = wd.mul(pot[p], _word(c.cocycle[nm][p]), wd.inverse(pot[q]))
    declared = {(p, x): _word(v) for p, x, v in ret["basis"]}
    if set(declared) != set(expect):
        return (False, "basis edges do not match the tree complement")
    for k, v in expect.items():
        if not c.equal(c.evaluate(v), c.evaluate(declared[k])):
            return (False, f"declared retraction of basis edge {k} disagrees")
    return (True, f"{len(expect)} basis elements")


def _check_elevations(c, cert):
    els = cert.get("witnesses", {}).get("elevations", [])
    starts = []
    for k, e in enumerate(els):
        delta = c.A.parse(e["loop"])
        g = c.A.parse(e["conjugator"])
        d = e["degree"]
        s = _lift(c.perms, c.names, g)
        p = s
        for i in range(1, d + 1):
            p = _lift(c.perms, c.names, delta, p)
            # g delta^i g^-1 lies in K exactly when delta^i fixes s
            if (p == s) != (i == d):
                return (False, f"elevation {k}: degree is not {d}")
        elem = wd.mul(g, wd.power(delta, d), wd.inverse(g))
        end, lab = _lift_labels(c.perms, c.cocycle, c.names, elem)
        if end != 0 or not c.equal(c.evaluate(lab), ()):
            return (False, f"elevation {k}: retraction does not kill the generator")
        orbit = set()
        p = s
        for _ in range(d):
            orbit.add(p)
            p = _lift(c.perms, c.names, delta, p)
        for k2, (delta2, s2, orb2) in enumerate(starts):
            if delta2 == delta and s in orb2:
                return (False, f"elevations {k2} and {k} are isomorphic")
        starts.append((delta, s, orbit))
    return (True, f"{len(els)} elevations")


def check_double_coset(cert):
    c = _Ctx(cert)
    w = cert["witnesses"]
    which = w["group"]
    pts = [_lift(c.perms, c.names, wd.inverse(c.A.parse(w[k]))) for k in ("g", "h")]
    if pts != w["points"]:
        return False
    ext = c.X.extensions[0]
    if which == "A":
        gens = [((x, 1),) for x in range(c.X.base_rank)]
    elif which == "B":
        gens = [ext.z] + [((x, 1),) for x in ext.letters]
    else:
        gens = [ext.z]
    orbit = {pts[0]}
    stack = [pts[0]]
    while stack:
        p = stack.pop()
        for g in gens:
            for u in (g, wd.inverse(g)):
                q = _lift(c.perms, c.names, u, p)
                if q not in orbit:
                    orbit.add(q)
                    stack.append(q)
    return pts[1] not in orbit


def verify_certificate(cert):
    """Full report: {check name: (passed, detail)}."""
    rep = dict(check_cover(cert))
    if not all(v[0] for v in rep.values()):
        return rep
    rep.update({f"retraction.{k}": v for k, v in check_retraction(cert, report=True).items()})
    kind = cert.get("kind")
    try:
        if kind == "separate":
            rep["separation"] = (check_separation(cert), "")
        elif kind == "doublecoset":
            rep["double_coset"] = (check_double_coset(cert), "")
        else:
            c = _Ctx(cert)
            ok = all(_lift(c.perms, c.names, h) == 0 for h in c.gens)
            rep["subgroup_contained"] = (ok, "")
    except (MalformedCertificate, KeyError, TypeError, ValueError, IndexError) as exc:
        rep["witnesses"] = (False, str(exc))
    return rep


def passes(cert):
    return all(v[0] for v in verify_certificate(cert).values())


def retraction_of(cert, w):
    """rho(w) as a word of the group, for w in the cover subgroup."""
    c = _Ctx(cert)
    end, lab = _lift_labels(c.perms, c.cocycle, c.names, w)
    if end != 0:
        raise ValueError("element is not in the cover subgroup")
    return c.evaluate(lab)


def check_idempotent(cert, elements):
    c = _Ctx(cert)
    for w in elements:
        r = retraction_of(cert, w)
        if not c.equal(retraction_of(cert, r), r):
            return False
    return True


def random_cover_elements(cert, count, rng, factors=3):
    """Random elements of the cover group: products of tree loops."""
    c = _Ctx(cert)
    tree = cert["retraction"]["tree"]
    path = {0: ()}
    idx = {n: i for i, n in enumerate(c.names)}
    todo = list(range(1, c.N))
    while todo:
        rest = []
        for p in todo:
            u, x = tree[p][1]
            if u in path:
                path[p] = path[u] + ((idx[x], 1),)
            else:
                rest.append(p)
        todo = rest
    out = []
    for _ in range(count):
        w = ()
        for _ in range(factors):
            p = rng.randrange(c.N)
            x = rng.choice(c.letters)
            q = _lift(c.perms, c.names, ((x, 1),), p)
            w = wd.mul(w, path[p], ((x, 1),), wd.inverse(path[q]))
        out.append(w)
    return out


# ---------------------------------------------------------------------------
# oracles


def brute_closure(gens, max_length, node_limit=200000):
    """Freely reduced words of length <= max_length reachable as products of
    generators, with intermediate products allowed up to 2*max_length."""
    gens = [wd.reduce(g) for g in gens if wd.reduce(g)]
    steps = gens + [wd.inverse(g) for g in gens]
    cap = 2 * max_length + max((len(g) for g in gens), default=0)
    seen = {()}
    q = deque([()])
    while q and len(seen) < node_limit:
        w = q.popleft()
        for s in steps:
            v = wd.mul(w, s)
            if len(v) <= cap and v not in seen:
                seen.add(v)
                q.append(v)
    return {w for w in seen if len(w) <= max_length}


def brute_membership(gens, w, bound, X=None, level=0):
    """True if w is a product of at most ``bound`` generators (and inverses),
    else "inconclusive"."""
    def key(u):
        if X is None or level == 0:
            return wd.reduce(u)
        return X.key(level, X.from_word(level, u))
    target = key(w)
    steps = list(gens) + [wd.inverse(g) for g in gens]
    frontier = {key(()): ()}
    seen = set(frontier)
    if target in seen:
        return True
    for _ in range(bound):
        nxt = {}
        for u in frontier.values():
            for s in steps:
                v = wd.mul(u, s)
                k = key(v)
                if k == target:
                    return True
                if k not in seen:
                    seen.add(k)
                    nxt[k] = v
        frontier = nxt
    return "inconclusive"


# ---------------------------------------------------------------------------
# fault injection

FAULT_KINDS = ("permutation", "cocycle", "basis", "tree", "embedding", "index",
               "torus_table", "lattice", "witness")


def inject(cert, kind, rng):
    """Copy of ``cert`` with one field of the given kind corrupted, or None if
    the certificate has no field of that kind."""
    bad = copy.deepcopy(cert)
    cov = bad["cover"]
    N = cov["points"]
    if kind == "permutation":
        x = rng.choice(sorted(cov["permutations"]))
        p = rng.randrange(N)
        img = cov["permutations"][x]
        img[p] = (img[p] + 1) % N if N > 1 else -1
    elif kind == "cocycle":
        x = rng.choice(sorted(bad["retraction"]["cocycle"]))
        p = rng.randrange(N)
        bad["retraction"]["cocycle"][x][p] = bad["retraction"]["cocycle"][x][p] + [[0, 1]]
    elif kind == "basis":
        if not bad["retraction"]["basis"]:
            return None
        i = rng.randrange(len(bad["retraction"]["basis"]))
        bad["retraction"]["basis"][i][2] = bad["retraction"]["basis"][i][2] + [[0, 1]]
    elif kind == "tree":
        if N < 2:
            return None
        p = rng.randrange(1, N)
        u, x = bad["retraction"]["tree"][p][1]
        bad["retraction"]["tree"][p][1] = [(u + 1) % N, x]
    elif kind == "embedding":
        vs = bad["embedding"]["vertices"]
        if N < 2 or not vs or not bad["embedding"]["edges"]:
            return None
        k = rng.choice(sorted({str(e[0]) for e in bad["embedding"]["edges"]}))
        vs[k] = (vs[k] + 1) % N
    elif kind == "index":
        bad["index"] = bad["index"] + 1
    elif kind == "torus_table":
        T = cov["pieces"].get("torus", [])
        if not T or N < 2:
            return None
        piece = rng.choice(T)
        i = rng.randrange(len(piece["points"]))
        piece["points"][i][1] = (piece["points"][i][1] + 1) % N
    elif kind == "lattice":
        T = cov["pieces"].get("torus", [])
        if not T:
            return None
        piece = rng.choice(T)
        piece["lattice"][0][0] += 1
    elif kind == "witness":
        w = bad.get("witnesses", {})
        if "endpoint" in w:
            w["endpoint"] = (w["endpoint"] + 1) % N
        elif w.get("elevations"):
            w["elevations"][0]["degree"] += 1
        elif "points" in w:
            w["points"][1] = (w["points"][1] + 1) % N
        else:
            return None
    else:
        raise ValueError(f"unknown fault kind {kind!r}")
    return bad


def fault_scan(cert, seed=0):
    """{kind: detected?} over all applicable fault kinds."""
    rng = random.Random(seed)
    out = {}
    for kind in FAULT_KINDS:
        bad = inject(cert, kind, rng)
        if bad is None:
            continue
        bad = json.loads(json.dumps(bad))
        out[kind] = not passes(bad)
    return out
