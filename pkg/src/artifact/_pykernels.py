"""Pure-Python kernels (fallback when the compiled extension is missing)."""

from __future__ import annotations


def fold_edges(n, rank, edges):
    """Union-find folding of a labeled digraph.

    ``edges`` is a sequence of ``(u, letter, v)``.  Returns ``(root, out, inn)``
    where ``root[v]`` is the class representative and ``out``/``inn`` are flat
    ``n * rank`` tables valid at representatives (entries are representatives).
    """
    parent = list(range(n))
    size = [1] * n
    out = [-1] * (n * rank)
    inn = [-1] * (n * rank)
    queue = []

    def find(v):
        r = v
        while parent[r] != r:
            r = parent[r]
        while parent[v] != r:
            parent[v], v = r, parent[v]
        return r

    def drain():
        while queue:
            p, q = queue.pop()
            p, q = find(p), find(q)
            if p == q:
                continue
            if size[p] > size[q]:
                p, q = q, p
            parent[p] = q
            size[q] += size[p]
            for x in range(rank):
                i, j = p * rank + x, q * rank + x
                if out[i] != -1:
                    if out[j] == -1:
                        out[j] = out[i]
                    else:
                        queue.append((out[i], out[j]))
                if inn[i] != -1:
                    if inn[j] == -1:
                        inn[j] = inn[i]
                    else:
                        queue.append((inn[i], inn[j]))

    for u, x, v in edges:
        u, v = find(u), find(v)
        i, j = u * rank + x, v * rank + x
        if out[i] == -1 and inn[j] == -1:
            out[i] = v
            inn[j] = u
        elif out[i] != -1:
            queue.append((out[i], v))
        else:
            queue.append((inn[j], u))
        drain()
    root = [find(v) for v in range(n)]
    out = [root[t] if t != -1 else -1 for t in out]
    inn = [root[t] if t != -1 else -1 for t in inn]
    return root, out, inn


def read_all(out, inn, rank, base, maxlen):
    """Acceptance mask over all reduced words of length <= maxlen.

    Words are enumerated by length, then lexicographically in the letter code
    ``2 * letter + (sign < 0)``.  Entry is 1 when the word reads a closed path
    at ``base``.
    """
    ncode = 2 * rank
    mask = bytearray([1])
    states = [base]
    lasts = [-1]
    for _ in range(maxlen):
        ns, nl = [], []
        for s, last in zip(states, lasts):
            forbid = last ^ 1 if last >= 0 else -1
            for c in range(ncode):
                if c == forbid:
                    continue
                if s < 0:
                    t = -1
                elif c & 1:
                    t = inn[s * rank + (c >> 1)]
                else:
                    t = out[s * rank + (c >> 1)]
                ns.append(t)
                nl.append(c)
        mask.extend(1 if t == base else 0 for t in ns)
        states, lasts = ns, nl
    return mask
