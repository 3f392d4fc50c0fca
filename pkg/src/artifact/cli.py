"""Command-line front end.

Exit codes: 0 success, 1 mathematical negative, 2 bad input, 3 resource limit
or undetermined hypothesis.
"""

from __future__ import annotations

import argparse
import json
import random
import sys

from artifact import hall, ice, tame, verify
from artifact import precover as pc
from artifact import words as wd

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_GUARDRAIL = 0, 1, 2, 3


class InputError(Exception):
    pass


def _space(path):
    try:
        with open(path) as fh:
            return ice.parse_script(fh.read())
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except ice.IceError as exc:
        raise InputError(f"{path}: {exc}") from None


def _word(X, text, what):
    try:
        return X.parse(text)
    except wd.WordError as exc:
        raise InputError(f"{what}: {exc}") from None


def _words(X, text, what):
    try:
        return wd.parse_list(text, X.alphabet)
    except wd.WordError as exc:
        raise InputError(f"{what}: {exc}") from None


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def dumps(data):
    """Canonical certificate text: sorted keys, fixed indentation."""
    return json.dumps(data, sort_keys=True, indent=1) + "\n"


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------


def cmd_member(args):
    X = _space(args.space)
    gens = _words(X, args.gens, "subgroup")
    w = _word(X, args.word, "word")
    ok, witness = tame.member(X, X.top, gens, w)
    print("true" if ok else "false")
    if ok and args.witness:
        print(wd.format_word(witness, wd.Alphabet.free(max(len(gens), 1),
                                                      [f"h{i}" for i in range(max(len(gens), 1))])))
    return EXIT_OK


def cmd_separate(args):
    X = _space(args.space)
    gens = _words(X, args.gens, "subgroup")
    g = _word(X, args.g, "element")
    cert = tame.separate(X, X.top, gens, g)
    _emit(dumps(cert.data), args.output)
    return EXIT_OK


def cmd_retract(args):
    X = _space(args.space)
    gens = _words(X, args.gens, "subgroup")
    cert = tame.virtual_retract(X, X.top, gens)
    _emit(dumps(cert.data), args.output)
    return EXIT_OK


def request_from_json(data, base_dir="."):
    """TameRequest from the JSON request format (see README)."""
    if "space" in data:
        try:
            X = ice.parse_script(data["space"])
        except ice.IceError as exc:
            raise InputError(f"space: {exc}") from None
    elif "space_file" in data:
        import os
        X = _space(os.path.join(base_dir, data["space_file"]))
    else:
        raise InputError("request needs 'space' or 'space_file'")
    gens = [_word(X, h, "subgroup") for h in data.get("subgroup", [])]
    loops = []
    for i, lp in enumerate(data.get("loops", [])):
        if not isinstance(lp, dict) or "loop" not in lp:
            raise InputError(f"loops[{i}]: expected {{'loop': ..., 'conjugators': [...]}}")
        loops.append((_word(X, lp["loop"], f"loops[{i}]"),
                      [_word(X, c, f"loops[{i}] conjugator") for c in lp.get("conjugators", ["1"])]))
    d = data.get("d", "auto")
    if d != "auto" and not (isinstance(d, int) and d >= 1):
        raise InputError("d must be a positive integer or 'auto'")
    paths = [_word(X, p, "paths") for p in data.get("paths", [])]
    level = data.get("level", X.top)
    return tame.TameRequest(X, level, gens, loops, None if d == "auto" else d, paths,
                            bool(data.get("allow_unverified", False)))


def cmd_tame(args):
    import os
    data = _load_json(args.request)
    req = request_from_json(data, os.path.dirname(os.path.abspath(args.request)))
    cert = tame.tame_cover(req)
    _emit(dumps(cert.data), args.output)
    return EXIT_OK


def cmd_doublecoset(args):
    X = _space(args.space)
    gens = _words(X, args.gens, "subgroup")
    g = _word(X, args.g, "g")
    h = _word(X, args.h, "h")
    res = tame.separate_double_coset(X, X.top, args.vertex, gens, g, h)
    if res == "equal":
        print("equal")
        return EXIT_NEGATIVE if args.strict else EXIT_OK
    _emit(dumps(res.data), args.output)
    return EXIT_OK


def cmd_verify(args):
    cert = _load_json(args.cert)
    try:
        report = verify.verify_certificate(cert)
    except verify.MalformedCertificate as exc:
        raise InputError(f"{args.cert}: {exc}") from None
    ok = all(v[0] for v in report.values())
    out = {"passed": ok,
           "checks": {k: {"passed": v[0], "detail": v[1]} for k, v in sorted(report.items())}}
    if args.fuzz:
        if not ok:
            raise InputError("refusing to fuzz a certificate that does not verify")
        rng = random.Random(args.seed)
        print(f"fuzz seed {args.seed}", file=sys.stderr)
        detected = {}
        for _ in range(args.fuzz):
            kind = rng.choice(verify.FAULT_KINDS)
            bad = verify.inject(cert, kind, rng)
            if bad is None:
                continue
            hit = not verify.passes(json.loads(json.dumps(bad)))
            n, k = detected.get(kind, (0, 0))
            detected[kind] = (n + 1, k + hit)
        out["fuzz"] = {"seed": args.seed,
                       "kinds": {k: {"injected": n, "detected": h}
                                 for k, (n, h) in sorted(detected.items())}}
        ok = ok and all(n == h for n, h in detected.values())
        out["passed"] = ok
    sys.stdout.write(json.dumps(out, sort_keys=True, indent=1) + "\n")
    return EXIT_OK if ok else EXIT_NEGATIVE


def to_dot(cert):
    """Schreier graph of the cover, with torus-letter edges dashed."""
    cov = cert["cover"]
    X = ice.parse_script(cert["space"])
    free = set(X.alphabet.names[:X.base_rank])
    lines = ["digraph cover {", '  node [shape=circle];', '  0 [shape=doublecircle];']
    for x in sorted(cov["permutations"]):
        style = "" if x in free else ", style=dashed"
        for p, q in enumerate(cov["permutations"][x]):
            lines.append(f'  {p} -> {q} [label="{x}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def cmd_export_dot(args):
    cert = _load_json(args.cert)
    try:
        _emit(to_dot(cert), args.output)
    except (KeyError, TypeError, ice.IceError) as exc:
        raise InputError(f"{args.cert}: malformed certificate ({exc})") from None
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="artifact",
                                 description="Covers and retractions for iterated centralizer extensions.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("member", help="decide membership in a subgroup")
    p.add_argument("space")
    p.add_argument("gens", help="comma separated generators, e.g. 'aa,b'")
    p.add_argument("word")
    p.add_argument("--witness", action="store_true", help="print the subgroup word too")
    p.set_defaults(func=cmd_member)

    p = sub.add_parser("separate", help="finite cover separating g from H")
    p.add_argument("space")
    p.add_argument("gens")
    p.add_argument("g")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("retract", help="finite-index subgroup retracting onto H")
    p.add_argument("space")
    p.add_argument("gens")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_retract)

    p = sub.add_parser("tame", help="tame cover for a JSON request")
    p.add_argument("request")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_tame)

    p = sub.add_parser("doublecoset", help="separate double cosets of a vertex or edge group")
    p.add_argument("space")
    p.add_argument("vertex", choices=tame.VERTEX_GROUPS,
                   help="A free vertex group, B torus vertex group, C edge group")
    p.add_argument("gens")
    p.add_argument("g")
    p.add_argument("h")
    p.add_argument("-o", "--output")
    p.add_argument("--strict", action="store_true", help="exit 1 when the cosets are equal")
    p.set_defaults(func=cmd_doublecoset)

    p = sub.add_parser("verify", help="check a certificate independently")
    p.add_argument("cert")
    p.add_argument("--fuzz", type=int, default=0, metavar="N",
                   help="also inject N random single-field faults")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export-dot", help="render a certificate's cover as DOT")
    p.add_argument("cert")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export_dot)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except tame.MemberError as exc:
        print(exc, file=sys.stderr)
        return EXIT_NEGATIVE
    except hall.ThresholdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, tame.RequestError, hall.HypothesisError, pc.DisparityError,
            ice.IceError, wd.WordError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ice.GuardrailError, ice.UnverifiedHypothesis) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_GUARDRAIL


if __name__ == "__main__":
    sys.exit(main())
