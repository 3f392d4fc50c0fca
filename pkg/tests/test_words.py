from __future__ import annotations

from hypothesis import given, settings
from hypothesis import strategies as hst

from artifact import words as wd

A = wd.Alphabet.free(2)
P = A.parse

letters = hst.tuples(hst.integers(0, 1), hst.sampled_from((1, -1)))
raw_words = hst.lists(letters, max_size=20).map(tuple)


def stack_reduce(w):
    # independent oracle: push/pop machine
    st = []
    for x in w:
        if st and st[-1][0] == x[0] and st[-1][1] == -x[1]:
            st.pop()
        else:
            st.append(x)
    return tuple(st)


def test_reduce_examples():
    assert wd.reduce(((0, 1), (0, -1), (1, 1))) == P("b")
    assert wd.reduce(()) == ()
    raw = ((0, 1), (1, 1), (1, -1), (0, 1))
    assert wd.reduce(raw) == stack_reduce(raw) == P("a a")


def test_cyclic_reduce_examples():
    c = wd.cyclic_reduce(P("a b a'"))
    assert (c.word, c.witness) == (P("b"), P("a"))
    c = wd.cyclic_reduce(P("b"))
    assert (c.word, c.witness) == (P("b"), ())
    c = wd.cyclic_reduce(P("a a b a' a'"))
    assert (c.word, c.witness) == (P("b"), P("a a"))


def test_root_examples():
    r, k = wd.root(P("a b a b"))
    assert (r.word, k) == (P("a b"), 2)
    r, k = wd.root(P("a b'"))
    assert (r.word, k) == (P("a b'"), 1)
    r, k = wd.root(P("a a a a a a"))
    assert (r.word, k) == (P("a"), 6)


def test_independent_examples():
    assert wd.independent([P("a"), P("b")])
    assert not wd.independent([P("a b"), P("b a")])
    assert wd.independent([P("a a b"), P("a b b")])


def test_parse_positions():
    try:
        P("a b x")
    except wd.WordError as exc:
        assert exc.position == 4
    else:
        raise AssertionError("expected a parse error")
    assert P("aab'") == P("a a b'")
    assert P("1") == ()


@given(raw_words)
def test_reduce_idempotent(w):
    r = wd.reduce(w)
    assert wd.reduce(r) == r
    assert r == stack_reduce(w)


@settings(max_examples=200)
@given(raw_words.filter(lambda w: wd.reduce(w)))
def test_root_reproduces_core(w):
    r, k = wd.root(w)
    assert wd.cyclic_reduce(wd.power(r.word, k)).word == wd.cyclic_reduce(w).word


@given(raw_words.filter(lambda w: 0 < len(wd.reduce(w)) <= 6),
       hst.lists(letters, max_size=6).map(tuple))
def test_conjugates_not_independent(w, h):
    assert not wd.independent([w, wd.conjugate(w, h)])
