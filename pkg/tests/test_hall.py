from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from artifact import hall
from artifact import stallings as st
from artifact import words as wd

A = wd.Alphabet.free(2)
P = A.parse


def is_cover(g):
    for x in range(g.rank):
        img = [g.step(v, x, 1) for v in range(g.n)]
        if sorted(img) != list(range(g.n)):
            return False
    return True


def test_complete_examples():
    c = hall.complete_to_cover(st.subgroup_graph([P("a a")], 2))
    assert c.index == 2 and is_cover(c.cover)
    assert c.cover.rank_pi1() == 4 - 2 + 1 == 3
    killed = [e for e, img in c.retraction.items() if img == ()]
    assert len(killed) == 2
    full = st.full_graph(2)
    c = hall.complete_to_cover(full)
    assert c.index == 1
    assert hall.retraction_image(c, P("a b a'")) == P("a b a'")
    c = hall.complete_to_cover(st.subgroup_graph([P("b")], 2))
    assert c.index == 1 and c.cover.step(0, 0, 1) == 0


def test_retraction_image_examples():
    c = hall.complete_to_cover(st.subgroup_graph([P("a a")], 2))
    assert hall.retraction_image(c, P("a a")) == P("a a")
    assert hall.retraction_image(c, P("b")) == ()
    # tree-path decomposition: a a b = (a a)(b), the b-loop is a complement generator
    assert hall.retraction_image(c, P("a a b")) == P("a a")
    with pytest.raises(ValueError):
        hall.retraction_image(c, P("a"))


def test_controlled_cover_examples():
    c, rep = hall.controlled_cover(st.subgroup_graph([], 2), [(P("a"), [()])], 3)
    g = c.cover
    assert [st.membership(g, wd.power(P("a"), k)) for k in (1, 2, 3)] == [False, False, True]
    c, rep = hall.controlled_cover(st.subgroup_graph([P("b")], 2), [(P("a"), [()])], 1)
    assert c.cover.step(0, 0, 1) == 0 and rep["elevations"][0]["degree"] == 1
    c, rep = hall.controlled_cover(st.subgroup_graph([P("b")], 2),
                                   [(P("a"), [(), P("a b")])], 4)
    e1, e2 = rep["elevations"]
    assert e1["degree"] == e2["degree"] == 4
    orbit = {c.cover.read(wd.power(P("a"), k), e1["start"]) for k in range(4)}
    assert e2["start"] not in orbit
    for e in (e1, e2):
        g = e["conjugator"]
        for k in range(1, 5):
            elem = wd.mul(g, wd.power(P("a"), k), wd.inverse(g))
            assert st.membership(c.cover, elem) == (k == 4)


def test_controlled_cover_errors():
    core = st.subgroup_graph([P("a a")], 2)
    with pytest.raises(hall.HypothesisError):
        hall.controlled_cover(core, [(P("a"), [()])], 3)
    with pytest.raises(hall.HypothesisError):
        hall.controlled_cover(st.subgroup_graph([P("b")], 2), [(P("a a"), [()])], 3)


def rword(rng, n, lo=1):
    while True:
        w = wd.reduce(tuple((rng.randrange(2), rng.choice((1, -1)))
                            for _ in range(rng.randint(lo, n))))
        if len(w) >= lo:
            return w


@settings(max_examples=80, deadline=None)
@given(hst.integers(0, 10**6))
def test_controlled_cover_postconditions(seed):
    rng = random.Random(seed)
    gens = [rword(rng, 4) for _ in range(rng.randint(1, 2))]
    core = st.subgroup_graph(gens, 2)
    gamma = wd.root(rword(rng, 4))[0].word
    g = rword(rng, 3, 0) if rng.random() < 0.8 else ()
    d = rng.randint(3, 7)
    try:
        c, rep = hall.controlled_cover(core, [(gamma, [g])], d)
    except (hall.HypothesisError, hall.ThresholdError):
        return
    cover = c.cover
    assert is_cover(cover)
    # (1) degree exactly d by d membership queries
    for k in range(1, d + 1):
        assert st.membership(cover, wd.mul(g, wd.power(gamma, k), wd.inverse(g))) == (k == d)
    # (3) the core embeds, edge for edge
    assert len(set(c.embedding)) == core.n
    for u, x, v in core.edges():
        assert cover.step(c.embedding[u], x, 1) == c.embedding[v]
    # (4) identity on the subgroup, kills the designated generator
    for h in gens:
        assert hall.retraction_image(c, h) == h
    assert hall.retraction_image(c, rep["elevations"][0]["generator"]) == ()


@settings(max_examples=80, deadline=None)
@given(hst.integers(0, 10**6))
def test_completion_properties(seed):
    rng = random.Random(seed)
    rank = rng.randint(1, 3)
    gens = [wd.reduce(tuple((rng.randrange(rank), rng.choice((1, -1)))
                            for _ in range(rng.randint(1, 6)))) for _ in range(rng.randint(1, 4))]
    gens = [h for h in gens if h]
    core = st.subgroup_graph(gens, rank)
    c = hall.complete_to_cover(core)
    assert is_cover(c.cover) and c.index == core.n
    assert len(c.retraction) == c.cover.rank_pi1()
    for h in gens:
        assert hall.retraction_image(c, h) == h
    for u, x, v in core.edges():
        assert c.cover.step(u, x, 1) == v
