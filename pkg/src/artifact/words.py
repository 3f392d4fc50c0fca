"""Alphabets and freely reduced words.

A word is a tuple of ``(letter_id, sign)`` pairs with ``sign`` in ``{1, -1}``.
Plain tuples keep the hot paths cheap; the helpers below do the bookkeeping.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

Letter = tuple  # (letter id, sign)
Word = tuple  # tuple of Letter


class WordError(ValueError):
    """Malformed word text or unknown letter."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


@dataclass(frozen=True)
class Free:
    rank: int


@dataclass(frozen=True)
class Torus:
    rank: int
    level: int


@dataclass(frozen=True)
class Alphabet:
    """Letters of a stratified presentation.

    ``strata[0]`` is free; every later stratum is a torus of rank ``m``
    contributing ``m - 1`` fresh letters.
    """

    strata: tuple
    names: tuple
    stratum_of: tuple = field(repr=False)

    @staticmethod
    def build(strata, names):
        strata = tuple(strata)
        names = tuple(names)
        if not strata or not isinstance(strata[0], Free):
            raise ValueError("stratum 0 must be free")
        owner = []
        for i, s in enumerate(strata):
            if i and (not isinstance(s, Torus) or s.rank < 2):
                raise ValueError("torus strata need rank >= 2")
            owner += [i] * (s.rank if i == 0 else s.rank - 1)
        if len(owner) != len(names):
            raise ValueError("letter names do not match strata sizes")
        if len(set(names)) != len(names):
            raise ValueError("duplicate letter names")
        for n in names:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", n):
                raise ValueError(f"bad letter name {n!r}")
        return Alphabet(strata, names, tuple(owner))

    @staticmethod
    def free(rank, names=None):
        if names is None:
            names = default_names(rank)
        return Alphabet.build([Free(rank)], names)

    @property
    def size(self):
        return len(self.names)

    @property
    def free_rank(self):
        return self.strata[0].rank

    def letters_of(self, stratum):
        return [i for i, s in enumerate(self.stratum_of) if s == stratum]

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise WordError(f"unknown letter {name!r}") from None

    def parse(self, text):
        return parse(text, self)

    def format(self, w):
        return format_word(w, self)


def default_names(rank):
    base = "abcdefghijklmnopqrs"
    if rank <= len(base):
        return tuple(base[:rank])
    return tuple(f"x{i}" for i in range(rank))


def reduce(raw, alphabet=None):
    """Freely reduce a sequence of letters."""
    out = []
    for x, s in raw:
        if alphabet is not None and not 0 <= x < alphabet.size:
            raise WordError(f"unknown letter id {x}")
        if s not in (1, -1):
            raise WordError(f"bad sign {s}")
        if out and out[-1][0] == x and out[-1][1] == -s:
            out.pop()
        else:
            out.append((x, s))
    return tuple(out)


def inverse(w):
    return tuple((x, -s) for x, s in reversed(w))


def mul(*ws):
    out = []
    for w in ws:
        for x, s in w:
            if out and out[-1][0] == x and out[-1][1] == -s:
                out.pop()
            else:
                out.append((x, s))
    return tuple(out)


def power(w, k):
    if k < 0:
        w, k = inverse(w), -k
    return mul(*([w] * k)) if k else ()


def conjugate(w, g):
    """g^-1 w g."""
    return mul(inverse(g), w, g)


def is_reduced(w):
    return all(not (w[i][0] == w[i + 1][0] and w[i][1] == -w[i + 1][1])
               for i in range(len(w) - 1))


@dataclass(frozen=True)
class CyclicWord:
    word: tuple
    witness: tuple = ()

    def __len__(self):
        return len(self.word)


def cyclic_reduce(w):
    """Return the cyclically reduced core together with c: w = c core c^-1."""
    w = reduce(w)
    i, j = 0, len(w) - 1
    while i < j and w[i][0] == w[j][0] and w[i][1] == -w[j][1]:
        i += 1
        j -= 1
    return CyclicWord(w[i:j + 1], w[:i])


def root(w):
    """Primitive root of the cyclic reduction of ``w`` and its exponent."""
    core = cyclic_reduce(w)
    u = core.word
    n = len(u)
    if n == 0:
        raise ValueError("trivial word has no root")
    for p in range(1, n + 1):
        if n % p == 0 and u[:p] * (n // p) == u:
            return CyclicWord(u[:p], core.witness), n // p
    raise AssertionError("unreachable")


def rotations_match(u, v):
    """True when cyclically reduced ``v`` is a cyclic rotation of ``u``."""
    if len(u) != len(v):
        return False
    if not u:
        return True
    doubled = u + u
    n = len(u)
    return any(doubled[i:i + n] == v for i in range(n))


def conjugate_cyclic(u, v):
    """Conjugacy in a free group, by rotation on cyclic reductions."""
    return rotations_match(cyclic_reduce(u).word, cyclic_reduce(v).word)


def independent(words):
    """Pairwise non-conjugacy of cyclic roots (up to inversion)."""
    roots = []
    for w in words:
        if not reduce(w):
            raise ValueError("trivial element in set")
        roots.append(root(w)[0].word)
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            if rotations_match(roots[i], roots[j]) or \
                    rotations_match(roots[i], inverse(roots[j])):
                return False
    return True


def shortlex_key(w):
    # letters ordered x+ < x- < y+ ...
    return (len(w), tuple(2 * x + (s < 0) for x, s in w))


def parse(text, alphabet):
    """Parse ``a b a' t`` style text; unspaced text like ``aab'`` also works.

    The empty string and ``1`` denote the identity.
    """
    text = text.strip()
    if text in ("", "1"):
        return ()
    names = sorted(alphabet.names, key=len, reverse=True)
    out = []
    for tok in re.finditer(r"\S+", text):
        t, base = tok.group(), tok.start()
        i = 0
        while i < len(t):
            for n in names:
                if t.startswith(n, i):
                    break
            else:
                raise WordError(f"unknown letter at {t[i:]!r}", base + i)
            i += len(n)
            sign = 1
            while i < len(t) and t[i] == "'":
                sign = -sign
                i += 1
            if t.startswith("^-1", i):
                sign = -sign
                i += 3
            out.append((alphabet.names.index(n), sign))
    return reduce(out)


def parse_list(text, alphabet):
    """Comma separated words, e.g. ``aa,b``."""
    text = text.strip()
    if not text:
        return []
    return [parse(part, alphabet) for part in text.split(",")]


def format_word(w, alphabet, sep=" "):
    if not w:
        return "1"
    return sep.join(alphabet.names[x] + ("'" if s < 0 else "") for x, s in w)
