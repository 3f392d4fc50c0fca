"""Iterated centralizer extensions: spaces, normal forms, hyperbolicity.

Level 0 is the free group on the base letters.  Level ``l`` amalgamates the
level ``l-1`` group A with a free abelian group B = Z^m along <z>, where z is
the first coordinate of B and the extension's letters are the remaining
coordinates.

Elements of level ``l >= 1`` are stored as ``(syllables, k)`` meaning
``s_1 ... s_n z^k``.  A syllable is ``(0, a)`` with ``a`` a level ``l-1``
element chosen from the transversal of <z>, or ``(1, vec)`` with ``vec`` the
nonzero non-z coordinates of a torus element.  Adjacent syllables alternate.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field

from artifact import words as wd


class IceError(ValueError):
    pass


class GuardrailError(RuntimeError):
    """A configured resource limit was hit; the answer is unknown, not negative."""


class UnverifiedHypothesis(RuntimeError):
    pass


@dataclass(frozen=True)
class Limits:
    max_level: int = 3
    max_torus_rank: int = 3
    max_word_length: int = 64


DEFAULT_LIMITS = Limits()


@dataclass(frozen=True)
class Extension:
    z: tuple  # word over lower-level letters, cyclically reduced normal form
    m: int
    letters: tuple  # letter ids of the m-1 new generators


@dataclass(frozen=True, eq=False)
class IceSpace:
    alphabet: wd.Alphabet
    base_rank: int
    extensions: tuple
    limits: Limits = DEFAULT_LIMITS
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def top(self):
        return len(self.extensions)

    def level_of_letter(self, x):
        return self.alphabet.stratum_of[x]

    def letters_up_to(self, level):
        return [x for x in range(self.alphabet.size) if self.level_of_letter(x) <= level]

    def check_word(self, level, w):
        for x, _ in w:
            if self.level_of_letter(x) > level:
                raise IceError(f"letter {self.alphabet.names[x]!r} is above level {level}")
        if len(w) > self.limits.max_word_length:
            raise GuardrailError(f"word length {len(w)} exceeds {self.limits.max_word_length}")

    def parse(self, text):
        return self.alphabet.parse(text)

    def format(self, w):
        return self.alphabet.format(w)

    def to_script(self):
        names = self.alphabet.names
        lines = [f"base rank={self.base_rank} letters={','.join(names[:self.base_rank])}"]
        for e in self.extensions:
            zt = wd.format_word(e.z, self.alphabet)
            lines.append(f'extend z="{zt}" torus_rank={e.m} '
                         f'letters={",".join(names[x] for x in e.letters)}')
        return "\n".join(lines) + "\n"

    def describe(self):
        return {"script": self.to_script()}

    # -- element arithmetic -------------------------------------------------

    def identity(self, level):
        return () if level == 0 else ((), 0)

    def z_elt(self, level):
        key = ("z", level)
        if key not in self._cache:
            self._cache[key] = self.from_word(level - 1, self.extensions[level - 1].z)
        return self._cache[key]

    def from_word(self, level, w):
        if level == 0:
            return wd.reduce(w)
        e = self.identity(level)
        for letter in w:
            e = self.mul_letter(level, e, letter)
        return e

    def mul_letter(self, level, e, letter):
        if level == 0:
            if e and e[-1][0] == letter[0] and e[-1][1] == -letter[1]:
                return e[:-1]
            return e + (letter,)
        x, s = letter
        lv = self.level_of_letter(x)
        if lv > level:
            raise IceError(f"letter {self.alphabet.names[x]!r} is above level {level}")
        syls, k = e
        ext = self.extensions[level - 1]
        if lv == level:
            i = ext.letters.index(x)
            delta = [0] * (ext.m - 1)
            delta[i] = s
            if syls and syls[-1][0] == 1:
                vec = tuple(a + b for a, b in zip(syls[-1][1], delta))
                if any(vec):
                    return (syls[:-1] + ((1, vec),), k)
                return (syls[:-1], k)
            return (syls + ((1, tuple(delta)),), k)
        # letter from the lower level: lives in A
        if syls and syls[-1][0] == 0:
            a = self.mul_z_power(level, syls[-1][1], k)
            a = self.mul_letter(level - 1, a, letter)
            rep, j = self.decompose(level, a)
            if rep == self.identity(level - 1):
                return (syls[:-1], j)
            return (syls[:-1] + ((0, rep),), j)
        a = self.mul_z_power(level, self.identity(level - 1), k)
        a = self.mul_letter(level - 1, a, letter)
        rep, j = self.decompose(level, a)
        if rep == self.identity(level - 1):
            return (syls, j)
        return (syls + ((0, rep),), j)

    def mul_word(self, level, e, w):
        for letter in w:
            e = self.mul_letter(level, e, letter)
        return e

    def mul_z_power(self, level, a, k):
        """a * z_level^k computed in level-1 arithmetic."""
        z = self.extensions[level - 1].z
        w = z if k > 0 else wd.inverse(z)
        for _ in range(abs(k)):
            a = self.mul_word(level - 1, a, w)
        return a

    def to_word(self, level, e):
        if level == 0:
            return e
        syls, k = e
        ext = self.extensions[level - 1]
        out = []
        for kind, val in syls:
            if kind == 0:
                out.extend(self.to_word(level - 1, val))
            else:
                for x, c in zip(ext.letters, val):
                    out.extend([(x, 1 if c > 0 else -1)] * abs(c))
        out.extend(wd.power(ext.z, k))
        return wd.reduce(out)

    def key(self, level, e):
        w = self.to_word(level, e)
        return (len(w), tuple(2 * x + (s < 0) for x, s in w))

    def decompose(self, level, a):
        """Split a level-1 element ``a`` as ``rep * z^j`` with rep in the transversal."""
        key = ("dec", level, a)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        lower = level - 1
        z = self.extensions[level - 1].z
        n = len(self.to_word(lower, a))
        K = 2 * n // max(1, len(z)) + 2 if lower == 0 else 2 * n + 2
        best = None
        cur = self.mul_z_power(level, a, -K)
        zw = z
        for k in range(-K, K + 1):
            cand = (self.key(lower, cur), -k, cur)
            if best is None or cand[0] < best[0]:
                best = cand
            cur = self.mul_word(lower, cur, zw)
        _, j, rep = best
        res = (rep, j)
        self._cache[key] = res
        return res

    def mul(self, level, e1, e2):
        return self.mul_word(level, e1, self.to_word(level, e2))

    def inverse_elt(self, level, e):
        return self.from_word(level, wd.inverse(self.to_word(level, e)))

    def is_identity(self, level, e):
        return e == self.identity(level)


# ---------------------------------------------------------------------------
# construction and parsing


def make_space(base_rank, extensions=(), base_names=None, limits=DEFAULT_LIMITS):
    """``extensions``: sequence of (z text or word, m, [letter names])."""
    base_names = tuple(base_names or wd.default_names(base_rank))
    strata = [wd.Free(base_rank)]
    names = list(base_names)
    raw = []
    for lvl, (z, m, lnames) in enumerate(extensions, start=1):
        if m < 2:
            raise IceError("torus rank must be >= 2")
        if m > limits.max_torus_rank:
            raise GuardrailError(f"torus rank {m} exceeds {limits.max_torus_rank}")
        if len(lnames) != m - 1:
            raise IceError(f"extension {lvl} needs {m - 1} letter names")
        strata.append(wd.Torus(m, lvl))
        raw.append((z, m, tuple(range(len(names), len(names) + m - 1))))
        names += list(lnames)
    if len(raw) > limits.max_level:
        raise GuardrailError(f"level {len(raw)} exceeds {limits.max_level}")
    alphabet = wd.Alphabet.build(strata, names)
    exts = []
    X = None
    for lvl, (z, m, letters) in enumerate(raw, start=1):
        zw = alphabet.parse(z) if isinstance(z, str) else wd.reduce(z)
        for x, _ in zw:
            if alphabet.stratum_of[x] >= lvl:
                raise IceError(f"z of extension {lvl} uses letters of level >= {lvl}")
        exts.append(Extension(zw, m, letters))
        X = IceSpace(alphabet, base_rank, tuple(exts), limits)
        _validate_z(X, lvl)
    if X is None:
        X = IceSpace(alphabet, base_rank, (), limits)
    return X


def _validate_z(X, lvl):
    z = X.extensions[lvl - 1].z
    if not z:
        raise IceError("z must be nontrivial")
    lower = lvl - 1
    e = X.from_word(lower, z)
    if X.to_word(lower, e) != z:
        raise IceError("z must be given in normal form")
    if not _cyclically_reduced(X, lower, e):
        raise IceError("z must be cyclically reduced")
    if proper_power(X, lower, z):
        raise IceError("z must not be a proper power")


def parse_script(text, limits=DEFAULT_LIMITS):
    base = None
    exts = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            toks = shlex.split(line)
        except ValueError as exc:
            raise IceError(f"line {lineno}: {exc}") from None
        head, kv = toks[0], {}
        for t in toks[1:]:
            if "=" not in t:
                raise IceError(f"line {lineno}: expected key=value, got {t!r}")
            k, v = t.split("=", 1)
            kv[k] = v
        if head == "base":
            if base is not None:
                raise IceError(f"line {lineno}: duplicate base line")
            try:
                rank = int(kv["rank"])
            except (KeyError, ValueError):
                raise IceError(f"line {lineno}: base needs rank=<int>") from None
            names = kv["letters"].split(",") if "letters" in kv else None
            base = (rank, names)
        elif head == "extend":
            if base is None:
                raise IceError(f"line {lineno}: extend before base")
            if "z" not in kv:
                raise IceError(f"line {lineno}: extend needs z=")
            m = int(kv.get("torus_rank", "2"))
            if "letters" in kv:
                lnames = kv["letters"].split(",")
            elif "letter" in kv:
                stem = kv["letter"]
                lnames = [stem] if m == 2 else [f"{stem}{i}" for i in range(1, m)]
            else:
                lnames = [f"t{len(exts) + 1}_{i}" for i in range(1, m)]
            exts.append((kv["z"], m, lnames))
        else:
            raise IceError(f"line {lineno}: unknown directive {head!r}")
    if base is None:
        raise IceError("missing base line")
    rank, names = base
    try:
        return make_space(rank, exts, names, limits)
    except wd.WordError as exc:
        raise IceError(str(exc)) from None


# ---------------------------------------------------------------------------
# normal forms


@dataclass(frozen=True)
class NormalForm:
    level: int
    syllables: tuple  # tuple of words (one per syllable); last may be followed by edge part
    kinds: tuple  # 'A' or 'B' per syllable
    edge_power: int
    tag: tuple  # ('elliptic', vertex, conjugator) or ('hyperbolic', length)
    elt: object = field(repr=False, compare=False, default=None)

    @property
    def hyperbolic(self):
        return self.tag[0] == "hyperbolic"

    @property
    def translation_length(self):
        return self.tag[1] if self.hyperbolic else 0


def _syllable_words(X, level, e):
    if level == 0:
        return ((e,) if e else ()), (("A",) if e else ()), 0
    syls, k = e
    ext = X.extensions[level - 1]
    ws, kinds = [], []
    for kind, val in syls:
        if kind == 0:
            ws.append(X.to_word(level - 1, val))
            kinds.append("A")
        else:
            w = []
            for x, c in zip(ext.letters, val):
                w.extend([(x, 1 if c > 0 else -1)] * abs(c))
            ws.append(tuple(w))
            kinds.append("B")
    return tuple(ws), tuple(kinds), k


def _cyclically_reduced(X, level, e):
    if level == 0:
        return not e or not (e[0][0] == e[-1][0] and e[0][1] == -e[-1][1])
    syls, _ = e
    return len(syls) <= 1 or syls[0][0] != syls[-1][0]


def cyclic_reduction(X, level, e):
    """Conjugate ``e`` to cyclically reduced form: returns (e', c) with e = c e' c^-1."""
    conj = ()
    if level == 0:
        cw = wd.cyclic_reduce(e)
        return cw.word, cw.witness
    while True:
        syls, k = e
        if len(syls) <= 1 or syls[0][0] != syls[-1][0]:
            return e, conj
        first = _syllable_words(X, level, ((syls[0],), 0))[0][0]
        # e = s1 * rest  =>  s1^-1 e s1 = rest * s1
        e = X.mul_word(level, X.from_word(level, wd.inverse(first)), X.to_word(level, e))
        e = X.mul_word(level, e, first)
        conj = wd.mul(conj, first)


def normal_form(X, level, w):
    X.check_word(level, w)
    e = X.from_word(level, w)
    return _nf_from_elt(X, level, e)


def _nf_from_elt(X, level, e):
    ws, kinds, k = _syllable_words(X, level, e)
    if level == 0:
        return NormalForm(0, ws, kinds, 0, ("elliptic", "A", ()), e)
    ce, conj = cyclic_reduction(X, level, e)
    syls, _ = ce
    if len(syls) >= 2:
        tag = ("hyperbolic", len(syls))
    elif len(syls) == 1:
        tag = ("elliptic", "A" if syls[0][0] == 0 else "B", conj)
    else:
        tag = ("elliptic", "edge", conj)
    return NormalForm(level, ws, kinds, k, tag, e)


def equal(X, level, u, w):
    X.check_word(level, u)
    X.check_word(level, w)
    return X.from_word(level, u) == X.from_word(level, w)


def is_trivial(X, level, w):
    return X.from_word(level, w) == X.identity(level)


def normal_word(X, level, w):
    """Canonical word for the element (flattened normal form)."""
    return X.to_word(level, X.from_word(level, w))


ACYLINDRICITY = 2


def axis_data(X, level, w):
    nf = normal_form(X, level, w)
    if not nf.hyperbolic:
        raise IceError("element is elliptic")
    n = nf.translation_length
    return n, ACYLINDRICITY + n


def hyperbolic_core(X, level, w):
    """Cyclically reduced hyperbolic conjugate starting with an A-syllable.

    Returns ``(core_word, conjugator)`` with ``w = c core c^-1`` in the group,
    where ``core_word`` is the flattened normal form (edge part folded into
    the final syllable).
    """
    e = X.from_word(level, w)
    ce, conj = cyclic_reduction(X, level, e)
    syls, k = ce
    if len(syls) < 2:
        raise IceError("element is elliptic")
    if syls[0][0] != 0:
        first = _syllable_words(X, level, ((syls[0],), 0))[0][0]
        ce = X.mul_word(level, X.from_word(level, wd.inverse(first)), X.to_word(level, ce))
        ce = X.mul_word(level, ce, first)
        conj = wd.mul(conj, first)
    return X.to_word(level, ce), conj


def proper_power(X, level, w, bound=None):
    """Return (root word, p) if w is a proper power (p >= 2), else None.

    Free level: exact.  Higher levels: hyperbolic roots are searched with the
    edge shift bounded by ``bound`` (default 2 * len + 2).
    """
    if level == 0:
        r, p = wd.root(w)
        return (r.word, p) if p > 1 else None
    e = X.from_word(level, w)
    ce, _ = cyclic_reduction(X, level, e)
    syls, k = ce
    if len(syls) >= 2:
        n = len(syls)
        target = ce
        bound = bound if bound is not None else 2 * len(X.to_word(level, ce)) + 2
        for p in range(2, n + 1):
            if n % p or (n // p) % 2:
                continue
            head = X.to_word(level, (syls[:n // p], 0))
            zw = X.extensions[level - 1].z
            for j in range(-bound, bound + 1):
                r = wd.mul(head, wd.power(zw, j))
                if X.from_word(level, wd.power(r, p)) == target:
                    return r, p
        return None
    if len(syls) == 1 and syls[0][0] == 0:
        inner = X.to_word(level - 1, X.mul_z_power(level, syls[0][1], k))
        return proper_power(X, level - 1, inner, bound)
    vec = (k,) + (syls[0][1] if syls else ())
    g = 0
    for a in vec:
        g = _gcd(g, a)
    if g > 1:
        ext = X.extensions[level - 1]
        rvec = tuple(a // g for a in vec)
        r = list(wd.power(ext.z, rvec[0]))
        for x, c in zip(ext.letters, rvec[1:]):
            r.extend([(x, 1 if c > 0 else -1)] * abs(c))
        return wd.reduce(r), g
    return None


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return abs(a)


def conjugate_into_edge(X, level, w, bound=None):
    """Is ``w`` (an element of the level-1 group) conjugate into <z_level>?

    Exact at level 1 (free rotation test).  Above that a bounded search is
    used; ``None`` means undetermined.
    """
    lower = level - 1
    z = X.extensions[level - 1].z
    if lower == 0:
        cw = wd.cyclic_reduce(w).word
        zc = wd.cyclic_reduce(z).word
        if not cw or len(cw) % len(zc):
            return not cw
        j = len(cw) // len(zc)
        return wd.rotations_match(cw, wd.power(zc, j)) or \
            wd.rotations_match(cw, wd.power(zc, -j))
    e = X.from_word(lower, w)
    ce, _ = cyclic_reduction(X, lower, e)
    ze = X.from_word(lower, z)
    zce, _ = cyclic_reduction(X, lower, ze)
    tl_w = len(ce[0]) if len(ce[0]) >= 2 else 0
    tl_z = len(zce[0]) if len(zce[0]) >= 2 else 0
    if (tl_w == 0) != (tl_z == 0):
        return False
    if tl_w and tl_w % tl_z:
        return False
    bound = bound if bound is not None else 2 * len(w) + 2
    # bounded search over conjugators built from syllable rotations and edge shifts
    cands = _conjugate_candidates(X, lower, ce, bound)
    powers = [tl_w // tl_z] if tl_w else range(1, bound + 1)
    for j in powers:
        for sgn in (1, -1):
            target = X.from_word(lower, wd.power(z, sgn * j))
            for c in cands:
                cw = X.to_word(lower, c)
                if X.mul_word(lower, X.from_word(lower, wd.inverse(cw)),
                              wd.mul(X.to_word(lower, ce), cw)) == target:
                    return True
    # conjugating z^j by a power of z changes nothing, so for hyperbolic w the
    # rotation search is exhaustive
    return False if tl_w else None


def _conjugate_candidates(X, level, ce, bound):
    out = [X.identity(level)]
    syls, k = ce
    prefix = X.identity(level)
    for s in syls:
        prefix = X.mul(level, prefix, (((s,), 0) if level else s))
        out.append(prefix)
    if level >= 1:
        zw = X.extensions[level - 1].z
        extra = []
        for c in out:
            for j in range(-bound, bound + 1):
                if j:
                    extra.append(X.mul_word(level, c, wd.power(zw, j)))
        out += extra
    return out


def is_maximal_abelian_generator(X, level, w):
    """Does ``w`` generate its own centralizer (a maximal abelian subgroup)?"""
    X.check_word(level, w)
    e = X.from_word(level, w)
    if e == X.identity(level):
        raise IceError("trivial element")
    if level == 0:
        return wd.root(w)[1] == 1
    ce, _ = cyclic_reduction(X, level, e)
    syls, k = ce
    if len(syls) >= 2:
        return proper_power(X, level, w) is None
    if not syls or syls[0][0] == 1:
        return False  # torus or edge element: centralizer contains Z^m
    inner = X.to_word(level - 1, X.mul_z_power(level, syls[0][1], k))
    into = conjugate_into_edge(X, level, inner)
    if into is None:
        raise UnverifiedHypothesis("conjugacy into the edge group undetermined")
    if into:
        return False
    return is_maximal_abelian_generator(X, level - 1, inner)


def independent(X, level, loops, bound=4, allow_unverified=False):
    """Sufficient check that no two roots are conjugate (up to inversion).

    Level 0 is exact.  Above, hyperbolic roots are compared through a bounded
    conjugator search; an undetermined pair raises ``UnverifiedHypothesis``
    unless ``allow_unverified`` is set, in which case ``None`` is returned.
    """
    if level == 0:
        return wd.independent(loops)
    cores = []
    for w in loops:
        pp = proper_power(X, level, w)
        r = pp[0] if pp else w
        cores.append(r)
    for i in range(len(cores)):
        for j in range(i + 1, len(cores)):
            res = _bounded_conjugate(X, level, cores[i], cores[j], bound)
            if res is None:
                if allow_unverified:
                    return None
                raise UnverifiedHypothesis("independence undetermined")
            if res:
                return False
    return True


def _bounded_conjugate(X, level, u, v, bound):
    eu = X.from_word(level, u)
    ev = X.from_word(level, v)
    cu, _ = cyclic_reduction(X, level, eu)
    cv, _ = cyclic_reduction(X, level, ev)
    nu = len(cu[0]) if len(cu[0]) >= 2 else 0
    nv = len(cv[0]) if len(cv[0]) >= 2 else 0
    if nu != nv:
        return False
    for target in (cv, X.inverse_elt(level, cv)):
        for c in _conjugate_candidates(X, level, cu, bound):
            cw = X.to_word(level, c)
            got = X.mul_word(level, X.from_word(level, wd.inverse(cw)),
                             wd.mul(X.to_word(level, cu), cw))
            if got == target:
                return True
    if nu >= 2:
        # conjugate hyperbolic cyclically reduced forms differ by a rotation and
        # an edge shift; the candidates above cover shifts up to ``bound``
        return None if bound < 2 * (len(u) + len(v)) else False
    return None


