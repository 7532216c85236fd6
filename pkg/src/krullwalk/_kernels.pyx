# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops.  ``_kernels_py`` implements the same functions in pure
Python with bit-identical results."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, int32_t
from libc.stdlib cimport malloc, free, calloc
from libc.math cimport lgamma, exp, log

cnp.import_array()

cdef inline uint64_t rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef struct Xoshiro:
    uint64_t s0, s1, s2, s3


cdef inline uint64_t xo_next(Xoshiro* st) nogil:
    cdef uint64_t result = rotl(st.s1 * 5, 7) * 9
    cdef uint64_t t = st.s1 << 17
    st.s2 ^= st.s0
    st.s3 ^= st.s1
    st.s1 ^= st.s2
    st.s0 ^= st.s3
    st.s2 ^= t
    st.s3 = rotl(st.s3, 45)
    return result


cdef inline int64_t slot_of(int64_t* keys, uint64_t mask, int64_t key) nogil:
    cdef uint64_t h = (<uint64_t>key * <uint64_t>0x9E3779B97F4A7C15ULL) >> 20
    cdef uint64_t i = h & mask
    while keys[i] != key and keys[i] != -1:
        i = (i + 1) & mask
    return <int64_t>i


DENSE_CELLS = 1 << 27


cdef inline int64_t reduce_mod(int64_t v, int64_t modulus) nogil:
    if modulus > 0:
        while v >= modulus:
            v -= modulus
        while v < 0:
            v += modulus
    return v


def mc_lamp_chunk(const int64_t[:, ::1] moves,
                  const int64_t[::1] n_updates,
                  const int64_t[:, :, ::1] updates,
                  int d, int colors, int64_t modulus, int64_t n, int64_t samples,
                  uint64_t s0, uint64_t s1, uint64_t s2, uint64_t s3):
    """Count walks of length ``n`` (out of ``samples``) that end at the identity.

    ``updates[g, j] = (colour, delta, offset_1..offset_d)``.  Lamps live in a
    dense array over the reachable box when it fits in ``DENSE_CELLS`` cells,
    otherwise in an open-addressing table keyed by site.
    """
    cdef int n_gens = moves.shape[0]
    cdef int max_upd = updates.shape[1]
    cdef int64_t max_off = 0
    cdef int g, j, c, ax
    for g in range(n_gens):
        for j in range(max_upd):
            for ax in range(d):
                max_off = max(max_off, abs(updates[g, j, 2 + ax]))
    cdef int64_t half = n + max_off + 1
    cdef int64_t span = 2 * half + 1
    cdef int64_t cells = colors
    cdef bint dense = True
    for ax in range(d):
        if cells > DENSE_CELLS // span:
            dense = False
            break
        cells *= span
    # flattened programs: per (g, j) the colour, delta and linear site offset;
    # sites are linear indices into the (2 * half + 1)^d box, so the cursor is
    # one integer and the identity is the box centre
    cdef int64_t* ucol = <int64_t*>malloc(n_gens * max_upd * sizeof(int64_t))
    cdef int64_t* udel = <int64_t*>malloc(n_gens * max_upd * sizeof(int64_t))
    cdef int64_t* uoff = <int64_t*>malloc(n_gens * max_upd * sizeof(int64_t))
    cdef int64_t* nupd = <int64_t*>malloc(n_gens * sizeof(int64_t))
    cdef int64_t* mv = <int64_t*>malloc(n_gens * sizeof(int64_t))
    cdef int64_t cap = n * max_upd + 5
    cdef int64_t* used = <int64_t*>malloc(cap * sizeof(int64_t))
    cdef int64_t table = 16
    while table < 4 * cap:
        table *= 2
    cdef int64_t* keys = NULL
    cdef int64_t* hvals = NULL
    cdef int32_t* dvals = NULL
    if dense:
        dvals = <int32_t*>calloc(cells, sizeof(int32_t))
    else:
        keys = <int64_t*>malloc(table * sizeof(int64_t))
        hvals = <int64_t*>calloc(table * colors, sizeof(int64_t))
    if (ucol == NULL or udel == NULL or uoff == NULL or nupd == NULL or mv == NULL
            or used == NULL or (dense and dvals == NULL) or (not dense and (keys == NULL or hvals == NULL))):
        free(ucol); free(udel); free(uoff); free(nupd); free(mv); free(used)
        free(keys); free(hvals); free(dvals)
        raise MemoryError()
    cdef int64_t centre = 0, mult = 1, lin
    for ax in range(d):
        centre += half * mult
        mult *= span
    for g in range(n_gens):
        nupd[g] = n_updates[g]
        lin = 0
        mult = 1
        for ax in range(d):
            lin += moves[g, ax] * mult
            mult *= span
        mv[g] = lin
        for j in range(max_upd):
            ucol[g * max_upd + j] = updates[g, j, 0] if j < n_updates[g] else 0
            udel[g * max_upd + j] = updates[g, j, 1] if j < n_updates[g] else 0
            if modulus > 0:
                udel[g * max_upd + j] = udel[g * max_upd + j] % modulus
            lin = 0
            mult = 1
            if j < n_updates[g]:
                for ax in range(d):
                    lin += updates[g, j, 2 + ax] * mult
                    mult *= span
            uoff[g * max_upd + j] = lin
    cdef uint64_t mask = <uint64_t>(table - 1)
    cdef Xoshiro st
    st.s0 = s0; st.s1 = s1; st.s2 = s2; st.s3 = s3
    cdef int64_t i, k, step, nused, nz, hits = 0, site, sl, old, new, base, idx, cur
    cdef uint64_t r
    if not dense:
        for i in range(table):
            keys[i] = -1
    with nogil:
        for k in range(samples):
            nused = 0
            nz = 0
            cur = centre
            for step in range(n):
                r = xo_next(&st)
                g = <int>(((r >> 32) * <uint64_t>n_gens) >> 32)
                for j in range(nupd[g]):
                    base = g * max_upd + j
                    site = cur + uoff[base]
                    if dense:
                        idx = site * colors + ucol[base]
                        old = dvals[idx]
                        new = reduce_mod(old + udel[base], modulus)
                        dvals[idx] = <int32_t>new
                        if old == 0 and new != 0:
                            nz += 1
                            used[nused] = idx
                            nused += 1
                        elif old != 0 and new == 0:
                            nz -= 1
                        continue
                    sl = slot_of(keys, mask, site)
                    if keys[sl] == -1:
                        keys[sl] = site
                        used[nused] = sl
                        nused += 1
                    idx = sl * colors + ucol[base]
                    old = hvals[idx]
                    new = reduce_mod(old + udel[base], modulus)
                    hvals[idx] = new
                    if old == 0 and new != 0:
                        nz += 1
                    elif old != 0 and new == 0:
                        nz -= 1
                cur += mv[g]
            if nz == 0 and cur == centre:
                hits += 1
            for i in range(nused):
                if dense:
                    dvals[used[i]] = 0
                else:
                    sl = used[i]
                    keys[sl] = -1
                    for c in range(colors):
                        hvals[sl * colors + c] = 0
    free(ucol); free(udel); free(uoff); free(nupd); free(mv); free(used)
    free(keys); free(hvals); free(dvals)
    return hits, (st.s0, st.s1, st.s2, st.s3)


cdef inline double log_binom(double a, double b) nogil:
    # log C(a, b)
    return lgamma(a + 1.0) - lgamma(b + 1.0) - lgamma(a - b + 1.0)


def transfer_returns(const double[:, ::1] E, double w, int N):
    """Return probabilities p_0..p_N of a lamplighter walk over Z.

    ``E[s, T]`` is the weight of T lamp steps spread over s sojourns at one
    site with the lamp back at zero; ``w`` the weight of one cursor step.
    """
    cdef int L = N + 1
    cdef int U = N // 2
    G_np = np.zeros((U + 1, L))
    cdef double[:, ::1] G = G_np
    cdef double[::1] acc = np.zeros(L)
    cdef double[::1] tmp = np.zeros(L)
    cdef int u, up, a, b, top, glen, changed, s, lo
    cdef double coef, v, lw = log(w)
    G[0, 0] = 1.0
    changed = 1
    with nogil:
        while changed:
            changed = 0
            for u in range(1, U + 1):
                top = N - 2 * u
                for a in range(L):
                    acc[a] = 0.0
                up = 0
                while 2 * (u + up) <= N:
                    coef = exp(log_binom(u + up - 1, up) + 2 * up * lw)
                    glen = top - 2 * up
                    # acc[2up + a + b] += coef * G[up, a] * E[u + up, b]
                    for a in range(glen + 1):
                        v = G[up, a]
                        if v == 0.0:
                            continue
                        v = v * coef
                        for b in range(glen - a + 1):
                            acc[2 * up + a + b] += v * E[u + up, b]
                    up += 1
                for a in range(top + 1):
                    if acc[a] != G[u, a]:
                        changed = 1
                        G[u, a] = acc[a]
    # combine at the origin: sum_s w^{2s} z^{2s} E_{1+s} * sum_u C(s,u) G(u) G(s-u)
    P_np = np.zeros(L)
    cdef double[::1] P = P_np
    with nogil:
        s = 0
        while 2 * s <= N:
            top = N - 2 * s
            for a in range(top + 1):
                tmp[a] = 0.0
            for u in range(s + 1):
                coef = exp(log_binom(s, u))
                for a in range(top + 1):
                    v = G[u, a]
                    if v == 0.0:
                        continue
                    v = v * coef
                    for b in range(top - a + 1):
                        tmp[a + b] += v * G[s - u, b]
            coef = exp(2 * s * lw)
            for a in range(top + 1):
                v = tmp[a]
                if v == 0.0:
                    continue
                v = v * coef
                for b in range(top - a + 1):
                    P[2 * s + a + b] += v * E[1 + s, b]
            s += 1
    return P_np


def ball_containment_packed(const int64_t[::1] ball_masks, const int64_t[::1] ball_cursors,
                            int64_t lo, int64_t hi, int64_t window_lo, int64_t window_hi,
                            int64_t inner_lo, int64_t inner_hi, int64_t offset, int64_t max_witnesses):
    """Exhaustive check of Omega' * B subset Omega for F_2 wr Z couples.

    An element is (mask, cursor) with bit ``i`` of ``mask`` the lamp at site
    ``i - offset``.  Omega' = {all masks supported in [window_lo, window_hi]}
    x [inner_lo, inner_hi]; Omega the same masks x [lo, hi].  Ball elements are
    given relative to the identity; a product (m, x)(m', y) = (m ^ (m' << x), x + y).
    When the cursor stays in [lo, hi] and the shifted ball mask lies inside
    the window, every product does too, so all ``nmask`` pairs are counted at
    once; otherwise the masks are enumerated one by one.
    Returns (pairs checked, violations found, list of (mask, cursor, ball index)).
    """
    cdef int64_t nbits = window_hi - window_lo + 1
    cdef int64_t nmask = (<int64_t>1) << nbits
    cdef int64_t allowed = (nmask - 1) << (window_lo + offset)
    cdef int64_t nb = ball_masks.shape[0]
    cdef int64_t m, x, j, pm, bm, prod, y, checked = 0
    cdef int64_t found = 0
    wit = []
    cdef int64_t* wbuf = <int64_t*>malloc(3 * max_witnesses * sizeof(int64_t) + 8)
    with nogil:
        for x in range(inner_lo, inner_hi + 1):
            for j in range(nb):
                y = x + ball_cursors[j]
                bm = ball_masks[j]
                # shift ball lamps by the cursor x (sites relative to offset)
                if x >= 0:
                    bm = bm << x
                else:
                    bm = bm >> (-x)
                if lo <= y <= hi and (bm & ~allowed) == 0:
                    checked += nmask
                    continue
                for m in range(nmask):
                    pm = m << (window_lo + offset)
                    prod = pm ^ bm
                    checked += 1
                    if (prod & ~allowed) != 0 or y < lo or y > hi:
                        if found < max_witnesses:
                            wbuf[3 * found] = pm
                            wbuf[3 * found + 1] = x
                            wbuf[3 * found + 2] = j
                        found += 1
    for j in range(min(found, max_witnesses)):
        wit.append((wbuf[3 * j], wbuf[3 * j + 1], wbuf[3 * j + 2]))
    free(wbuf)
    return checked, found, wit
