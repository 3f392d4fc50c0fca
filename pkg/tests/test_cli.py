from __future__ import annotations

import json

import pytest

from artifact import cli, verify

LEVEL0 = "base rank=2 letters=a,b\n"
LEVEL1 = 'base rank=2 letters=a,b\nextend z="a" torus_rank=2 letters=t\n'


@pytest.fixture
def spaces(tmp_path):
    p0 = tmp_path / "level0.ice"
    p1 = tmp_path / "level1.ice"
    p0.write_text(LEVEL0)
    p1.write_text(LEVEL1)
    return str(p0), str(p1)


def test_separate_writes_certificate(spaces, tmp_path, capsys):
    out = tmp_path / "cert.json"
    assert cli.main(["separate", spaces[1], "b", "t", "-o", str(out)]) == 0
    cert = json.loads(out.read_text())
    assert cert["kind"] == "separate"
    assert verify.passes(cert)


def test_member_prints_false(spaces, capsys):
    assert cli.main(["member", spaces[0], "aa,b", "a"]) == 0
    assert capsys.readouterr().out.strip() == "false"


def test_member_witness(spaces, capsys):
    assert cli.main(["member", spaces[0], "aa,b", "aab", "--witness"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["true", "h0 h1"]


def test_separate_member_is_negative(spaces, capsys):
    assert cli.main(["separate", spaces[0], "aa,b", "b"]) == 1
    assert "element lies in subgroup" in capsys.readouterr().err


def test_input_errors_exit_2(spaces, tmp_path, capsys):
    assert cli.main(["member", str(tmp_path / "missing.ice"), "a", "a"]) == 2
    assert cli.main(["member", spaces[0], "a,q", "a"]) == 2
    bad = tmp_path / "bad.ice"
    bad.write_text("base rank=two\n")
    assert cli.main(["member", str(bad), "a", "a"]) == 2
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert cli.main(["verify", str(junk)]) == 2


def test_guardrail_exit_3(tmp_path, capsys):
    p = tmp_path / "level2.ice"
    p.write_text(LEVEL1 + 'extend z="b" torus_rank=2 letters=u\n')
    assert cli.main(["retract", str(p), "b"]) == 3
    assert "resource limit" in capsys.readouterr().err


def test_retract_and_verify_roundtrip(spaces, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert cli.main(["retract", spaces[1], "bt", "-o", str(out)]) == 0
    capsys.readouterr()
    assert cli.main(["verify", str(out)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"]


def test_verify_rejects_corruption(spaces, tmp_path, capsys):
    out = tmp_path / "s.json"
    cli.main(["separate", spaces[0], "aa,b", "a", "-o", str(out)])
    cert = json.loads(out.read_text())
    cert["cover"]["permutations"]["a"] = [0, 0]
    out.write_text(json.dumps(cert))
    assert cli.main(["verify", str(out)]) == 1


def test_verify_fuzz(spaces, tmp_path, capsys):
    out = tmp_path / "s.json"
    cli.main(["separate", spaces[1], "b", "t", "-o", str(out)])
    capsys.readouterr()
    assert cli.main(["verify", str(out), "--fuzz", "30", "--seed", "4"]) == 0
    res = capsys.readouterr()
    assert "fuzz seed 4" in res.err
    report = json.loads(res.out)
    assert all(v["injected"] == v["detected"] for v in report["fuzz"]["kinds"].values())


def test_tame_request(tmp_path, capsys):
    req = {"space": LEVEL1, "subgroup": ["b"], "loops": [{"loop": "bt", "conjugators": ["1"]}],
           "d": 3}
    p = tmp_path / "req.json"
    p.write_text(json.dumps(req))
    assert cli.main(["tame", str(p)]) == 0
    cert = json.loads(capsys.readouterr().out)
    assert cert["witnesses"]["elevations"][0]["degree"] == 3
    assert verify.passes(cert)


def test_tame_request_space_file(spaces, tmp_path, capsys):
    req = {"space_file": "level1.ice", "subgroup": ["b"]}
    p = tmp_path / "req.json"
    p.write_text(json.dumps(req))
    assert cli.main(["tame", str(p)]) == 0
    p.write_text(json.dumps({"subgroup": ["b"]}))
    assert cli.main(["tame", str(p)]) == 2
    p.write_text(json.dumps({"space": LEVEL1, "subgroup": ["b"], "d": 0}))
    assert cli.main(["tame", str(p)]) == 2


def test_doublecoset(spaces, tmp_path, capsys):
    assert cli.main(["doublecoset", spaces[1], "B", "b", "1", "b"]) == 0
    assert capsys.readouterr().out.strip() == "equal"
    assert cli.main(["doublecoset", spaces[1], "B", "b", "1", "b", "--strict"]) == 1
    out = tmp_path / "dc.json"
    assert cli.main(["doublecoset", spaces[1], "B", "b", "1", "bt", "-o", str(out)]) == 0
    assert verify.passes(json.loads(out.read_text()))


def test_export_dot(spaces, tmp_path, capsys):
    out = tmp_path / "s.json"
    cli.main(["separate", spaces[1], "b", "t", "-o", str(out)])
    capsys.readouterr()
    assert cli.main(["export-dot", str(out)]) == 0
    dot = capsys.readouterr().out
    assert dot.startswith("digraph cover {") and "style=dashed" in dot


def test_output_is_deterministic(spaces, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli.main(["separate", spaces[1], "ab", "ta", "-o", str(a)])
    cli.main(["separate", spaces[1], "ab", "ta", "-o", str(b)])
    assert a.read_bytes() == b.read_bytes()
