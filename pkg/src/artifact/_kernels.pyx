# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernels: union-find folding and bulk word reading."""

from cpython.array cimport array, clone

cdef array _int_template = array("i")


cdef inline int _find(int[:] parent, int v) noexcept:
    cdef int r = v, t
    while parent[r] != r:
        r = parent[r]
    while parent[v] != r:
        t = parent[v]
        parent[v] = r
        v = t
    return r


def fold_edges(int n, int rank, edges):
    cdef array parent_a = clone(_int_template, n, False)
    cdef array size_a = clone(_int_template, n, False)
    cdef array out_a = clone(_int_template, n * rank, False)
    cdef array inn_a = clone(_int_template, n * rank, False)
    cdef int[:] parent = parent_a
    cdef int[:] size = size_a
    cdef int[:] out = out_a
    cdef int[:] inn = inn_a
    cdef int i, j, p, q, u, v, x, k
    cdef list queue = []
    for i in range(n):
        parent[i] = i
        size[i] = 1
    for i in range(n * rank):
        out[i] = -1
        inn[i] = -1
    for e in edges:
        u = _find(parent, e[0])
        x = e[1]
        v = _find(parent, e[2])
        i = u * rank + x
        j = v * rank + x
        if out[i] == -1 and inn[j] == -1:
            out[i] = v
            inn[j] = u
        elif out[i] != -1:
            queue.append((out[i], v))
        else:
            queue.append((inn[j], u))
        while queue:
            pq = queue.pop()
            p = _find(parent, pq[0])
            q = _find(parent, pq[1])
            if p == q:
                continue
            if size[p] > size[q]:
                p, q = q, p
            parent[p] = q
            size[q] += size[p]
            for k in range(rank):
                i = p * rank + k
                j = q * rank + k
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
    root = [0] * n
    for i in range(n):
        root[i] = _find(parent, i)
    for i in range(n * rank):
        if out[i] != -1:
            out[i] = _find(parent, out[i])
        if inn[i] != -1:
            inn[i] = _find(parent, inn[i])
    return root, list(out_a), list(inn_a)


def read_all(out_list, inn_list, int rank, int base, int maxlen):
    cdef array out_a = array("i", out_list)
    cdef array inn_a = array("i", inn_list)
    cdef int[:] out = out_a
    cdef int[:] inn = inn_a
    cdef int ncode = 2 * rank
    cdef Py_ssize_t total = 1, layer = 1, k, idx, w, pos
    cdef int c, s, t, forbid
    for k in range(maxlen):
        layer = ncode if k == 0 else layer * (ncode - 1)
        total += layer
    mask_b = bytearray(total)
    cdef unsigned char[:] mask = mask_b
    mask[0] = 1
    cdef array st_a = clone(_int_template, total, False)
    cdef array la_a = clone(_int_template, total, False)
    cdef int[:] st = st_a
    cdef int[:] la = la_a
    st[0] = base
    la[0] = -1
    cdef Py_ssize_t lo = 0, hi = 1
    pos = 1
    for k in range(maxlen):
        for w in range(lo, hi):
            s = st[w]
            forbid = (la[w] ^ 1) if la[w] >= 0 else -1
            for c in range(ncode):
                if c == forbid:
                    continue
                if s < 0:
                    t = -1
                elif c & 1:
                    t = inn[s * rank + (c >> 1)]
                else:
                    t = out[s * rank + (c >> 1)]
                st[pos] = t
                la[pos] = c
                mask[pos] = 1 if t == base else 0
                pos += 1
        lo, hi = hi, pos
    return mask_b
