"""Compiled kernels against the pure-Python fallback.

    python3 bench/bench_kernels.py [--repeat 5] [--seed 0]

Both backends must return identical results; timings are best-of-repeat.
"""

from __future__ import annotations

import argparse
import random
import time

from artifact import _pykernels as py

try:
    from artifact import _kernels as cy
except ImportError:
    cy = None


def random_graph(rng, n, rank, extra):
    """Wedge-like graph: a long random path plus random chords."""
    edges = [(i, rng.randrange(rank), i + 1) for i in range(n - 1)]
    edges += [(rng.randrange(n), rng.randrange(rank), rng.randrange(n)) for _ in range(extra)]
    return edges


def best(fn, repeat):
    t = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = fn()
        t = min(t, time.perf_counter() - t0)
    return t, res


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    print(f"seed {args.seed}")
    if cy is None:
        print("compiled extension not built; only the fallback is available")
    rng = random.Random(args.seed)
    rows = []
    for n, rank in ((2000, 2), (20000, 3), (100000, 3)):
        edges = random_graph(rng, n, rank, n // 10)
        tp, rp = best(lambda: py.fold_edges(n, rank, edges), args.repeat)
        row = [f"fold n={n} rank={rank}", tp]
        if cy is not None:
            tc, rc = best(lambda: cy.fold_edges(n, rank, edges), args.repeat)
            assert list(rp[0]) == list(rc[0]), "backends disagree"
            row.append(tc)
        rows.append(row)
    for rank, maxlen in ((2, 10), (3, 8)):
        root, out, inn = py.fold_edges(60, rank, random_graph(rng, 60, rank, 40))
        b = root[0]
        tp, rp = best(lambda: py.read_all(out, inn, rank, b, maxlen), args.repeat)
        row = [f"read_all rank={rank} len<={maxlen}", tp]
        if cy is not None:
            tc, rc = best(lambda: cy.read_all(out, inn, rank, b, maxlen), args.repeat)
            assert bytes(rp) == bytes(rc), "backends disagree"
            row.append(tc)
        rows.append(row)
    print(f"{'kernel':34s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s}")
    for row in rows:
        if len(row) == 3:
            print(f"{row[0]:34s} {row[1]:10.4f} {row[2]:11.4f} {row[1] / row[2]:7.1f}x")
        else:
            print(f"{row[0]:34s} {row[1]:10.4f} {'-':>11s}")


if __name__ == "__main__":
    main()
