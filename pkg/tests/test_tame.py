from __future__ import annotations

import json

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as hst

from artifact import hall, ice, tame, verify
from artifact import precover as pc
from artifact import words as wd

X0 = ice.make_space(2)
X1 = ice.make_space(2, [("a", 2, ["t"])])
P0, P1 = X0.parse, X1.parse


def roundtrip(cert):
    return json.loads(json.dumps(cert.data))


def all_pass(cert):
    return all(ok for ok, _ in verify.verify_certificate(roundtrip(cert)).values())


def test_level0_hall_certificate():
    c = tame.tame_cover(tame.TameRequest(X0, 0, [P0("a a"), P0("b")]))
    assert c.index == 2
    assert all_pass(c)
    d = roundtrip(c)
    assert verify.retraction_of(d, P0("a a")) == P0("a a")
    assert verify.retraction_of(d, P0("b")) == P0("b")


def test_level1_designated_elevation_degree_three():
    bt = P1("b t")
    c = tame.tame_cover(tame.TameRequest(X1, 1, [P1("b")], [(bt, [()])], d=3))
    d = roundtrip(c)
    assert all_pass(c)
    (el,) = d["witnesses"]["elevations"]
    assert el["degree"] == 3
    # degree 3 by direct lifting: bt, (bt)^2 open, (bt)^3 closed
    perms = d["cover"]["permutations"]
    ends = [verify._lift(perms, X1.alphabet.names, wd.power(bt, k)) for k in (1, 2, 3)]
    assert ends[0] != 0 and ends[1] != 0 and ends[2] == 0
    assert verify.retraction_of(d, P1("b")) == P1("b")


def test_level1_whole_group_is_identity():
    gens = [P1("a"), P1("b"), P1("t")]
    c = tame.tame_cover(tame.TameRequest(X1, 1, gens))
    assert c.index == 1
    assert all_pass(c)
    d = roundtrip(c)
    for g in gens:
        assert ice.equal(X1, 1, verify.retraction_of(d, g), g)


def test_below_threshold_reports_threshold():
    req = tame.TameRequest(X1, 1, [P1("b")], [(P1("b t"), [()])])
    thr = tame.tame_cover(req).threshold
    if thr > 1:
        with pytest.raises(hall.ThresholdError, match=str(thr)):
            tame.tame_cover(tame.TameRequest(X1, 1, [P1("b")], [(P1("b t"), [()])], d=thr - 1))


def test_level2_guardrail():
    X2 = ice.make_space(2, [("a", 2, ["t"]), ("b", 2, ["u"])])
    with pytest.raises(ice.GuardrailError):
        tame.tame_cover(tame.TameRequest(X2, 2, [X2.parse("b")]))


# --- finitize / complete -----------------------------------------------------


def test_finitize_cylinder_gets_full_rank():
    Q = pc.from_subgroup(X1, [P1("t")], 1)
    (piece,) = Q.pieces.values()
    assert not piece.lattice(2).full_rank
    R, rep = tame.finitize(Q.copy(), degree=4)
    (piece,) = R.pieces.values()
    L = piece.lattice(2)
    assert L.full_rank and L.index % 4 == 0
    assert rep["piece_degrees"] == {0: 4}


def test_finitize_keeps_hanging_degree():
    Q = pc.from_subgroup(X1, [P1("a a a")], 1)
    assert Q.hanging() == [("+", ("free", 0), 0, 3)]
    R, _ = tame.finitize(Q.copy(), degree=3)
    assert R.hanging() == [("+", ("free", 0), 0, 3)]


def test_finitize_finite_is_unchanged():
    Q = pc.from_subgroup(X1, [P1("a"), P1("b"), P1("t")], 1)
    R, _ = tame.finitize(Q.copy())
    assert R.to_json() == Q.to_json()


def test_complete_minus_side_gets_free_auxiliary():
    P = pc.PreCover(X1, 0, 1)
    j = P.new_piece("core", [((2, 0), ()), ((0, 2), ())], [(0, 0)])
    P.add_rung(0, j, (0, 0))
    P._zcycle(0, 2, P.lam(j, (2, 0)), "core")
    for v in sorted(P.alive):
        P.add_edge(v, 1, v)
    P.drain()
    assert P.hanging() == [("-", ("torus", j), (0, 1), 2)]
    C, log = tame.complete(P.copy())
    assert log == [("free auxiliary", j, 2)]
    assert C.is_cover()


def test_complete_plus_side_gets_torus_auxiliary():
    gens = [P1("a a a a a")] + [P1(" ".join(["a"] * k + ["b"] + ["a'"] * k)) for k in range(5)]
    Q = pc.from_subgroup(X1, gens, 1)
    assert Q.hanging() == [("+", ("free", 0), 0, 5)]
    C, log = tame.complete(Q.copy())
    assert log == [("torus auxiliary", 5)]
    assert C.is_cover()
    aux = [p for p in C.pieces.values() if p.aux]
    assert [p.lattice(2).rows for p in aux] == [((5, 0), (0, 1))]


def test_complete_on_cover_is_noop():
    Q = pc.from_subgroup(X1, [P1("a"), P1("b"), P1("t")], 1)
    C, log = tame.complete(Q.copy())
    assert log == [] and C.is_cover()


# --- corollaries -------------------------------------------------------------


def test_separate_level0():
    c = tame.separate(X0, 0, [P0("a a"), P0("b")], P0("a"))
    d = roundtrip(c)
    assert c.index == 2
    assert d["witnesses"]["endpoint"] != 0
    assert verify.check_separation(d, [P0("a a"), P0("b")], P0("a"))
    assert d["cover"]["permutations"]["a"] == [1, 0]


def test_separate_level1():
    c = tame.separate(X1, 1, [P1("b")], P1("t"))
    d = roundtrip(c)
    assert all_pass(c) and verify.check_separation(d, [P1("b")], P1("t"))
    assert d["witnesses"]["endpoint"] != 0


def test_separate_member_raises():
    with pytest.raises(tame.MemberError, match="element lies in subgroup"):
        tame.separate(X0, 0, [P0("a a"), P0("b")], P0("b"))


def test_virtual_retract_examples():
    whole = tame.virtual_retract(X1, 1, [P1("a"), P1("b"), P1("t")])
    assert whole.index == 1 and all_pass(whole)
    c = tame.virtual_retract(X0, 0, [P0("a a")])
    d = roundtrip(c)
    assert c.index == 2 and len(d["retraction"]["basis"]) == 3
    # basis entries are (vertex, letter, image); two of the three are killed
    assert sorted(len(img) for _, _, img in d["retraction"]["basis"]) == [0, 0, 1]
    c = tame.virtual_retract(X1, 1, [P1("b t")])
    assert all_pass(c)
    assert ice.equal(X1, 1, verify.retraction_of(roundtrip(c), P1("b t")), P1("b t"))


def test_double_coset_examples():
    assert tame.separate_double_coset(X1, 1, "A", [P1("b")], P1("a"), P1("a")) == "equal"
    assert tame.separate_double_coset(X1, 1, "C", [P1("a")], (), P1("a")) == "equal"
    # b lies in the subgroup, so B.b.<b> = B.<b>; b t is a different double coset
    assert tame.separate_double_coset(X1, 1, "B", [P1("b")], (), P1("b")) == "equal"
    c = tame.separate_double_coset(X1, 1, "B", [P1("b")], (), P1("b t"))
    assert c != "equal"
    d = roundtrip(c)
    assert all_pass(c) and verify.check_double_coset(d)
    with pytest.raises(tame.RequestError):
        tame.separate_double_coset(X1, 1, "D", [P1("b")], (), P1("b"))


# --- properties --------------------------------------------------------------

LETTERS = ["a", "b", "t", "a'", "b'", "t'"]
word1 = hst.lists(hst.sampled_from(LETTERS), min_size=1, max_size=4).map(
    lambda xs: wd.reduce(P1(" ".join(xs))))


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(hst.lists(word1, min_size=1, max_size=2), word1)
def test_separate_certificates_verify(gens, g):
    gens = [h for h in gens if h]
    if not gens or not g or tame.member(X1, 1, gens, g)[0]:
        return
    c = tame.separate(X1, 1, gens, g)
    assert c.index >= 2
    assert all_pass(c)


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(hst.lists(word1, min_size=1, max_size=2))
def test_retract_certificates_verify(gens):
    gens = [h for h in gens if h]
    if not gens:
        return
    c = tame.virtual_retract(X1, 1, gens)
    assert all_pass(c)
