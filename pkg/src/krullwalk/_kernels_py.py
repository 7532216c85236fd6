"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Every function returns exactly what its compiled counterpart returns; the
Monte Carlo kernel reproduces the same xoshiro256** stream bit for bit.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def mc_lamp_chunk(moves, n_updates, updates, d, colors, modulus, n, samples, s0, s1, s2, s3):
    n_gens = len(moves)
    moves = [tuple(int(v) for v in row) for row in np.asarray(moves)]
    progs = []
    updates = np.asarray(updates)
    for g in range(n_gens):
        progs.append([(int(updates[g, j, 0]), int(updates[g, j, 1]),
                       tuple(int(v) for v in updates[g, j, 2:2 + d]))
                      for j in range(int(n_updates[g]))])
    hits = 0
    origin = (0,) * d
    for _ in range(samples):
        lamps: dict = {}
        cur = [0] * d
        for _step in range(n):
            result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
            t = (s1 << 17) & MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = _rotl(s3, 45)
            g = ((result >> 32) * n_gens) >> 32
            for c, delta, off in progs[g]:
                key = (c,) + tuple(cur[a] + off[a] for a in range(d))
                v = lamps.get(key, 0) + delta
                if modulus > 0:
                    v %= modulus
                if v:
                    lamps[key] = v
                else:
                    lamps.pop(key, None)
            mv = moves[g]
            for a in range(d):
                cur[a] += mv[a]
        if not lamps and tuple(cur) == origin:
            hits += 1
    return hits, (s0, s1, s2, s3)


def transfer_returns(E, w, N):
    E = np.asarray(E, dtype=float)
    L = N + 1
    U = N // 2
    G = np.zeros((U + 1, L))
    G[0, 0] = 1.0
    lw = math.log(w)

    def logc(a, b):
        return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)

    changed = True
    while changed:
        changed = False
        for u in range(1, U + 1):
            top = N - 2 * u
            acc = np.zeros(L)
            up = 0
            while 2 * (u + up) <= N:
                coef = math.exp(logc(u + up - 1, up) + 2 * up * lw)
                glen = top - 2 * up
                conv = np.convolve(G[up, :glen + 1] * coef, E[u + up, :glen + 1])[:glen + 1]
                acc[2 * up:2 * up + glen + 1] += conv
                up += 1
            if not np.array_equal(acc[:top + 1], G[u, :top + 1]):
                changed = True
                G[u, :top + 1] = acc[:top + 1]
    P = np.zeros(L)
    s = 0
    while 2 * s <= N:
        top = N - 2 * s
        tmp = np.zeros(top + 1)
        for u in range(s + 1):
            coef = math.exp(logc(s, u))
            tmp += np.convolve(G[u, :top + 1] * coef, G[s - u, :top + 1])[:top + 1]
        P[2 * s:] += np.convolve(tmp * math.exp(2 * s * lw), E[1 + s, :top + 1])[:top + 1]
        s += 1
    return P


def ball_containment_packed(ball_masks, ball_cursors, lo, hi, window_lo, window_hi,
                            inner_lo, inner_hi, offset, max_witnesses):
    nbits = window_hi - window_lo + 1
    nmask = 1 << nbits
    allowed = (nmask - 1) << (window_lo + offset)
    checked = 0
    found = 0
    wit = []
    for x in range(inner_lo, inner_hi + 1):
        for j, (bm0, bc) in enumerate(zip(ball_masks, ball_cursors)):
            y = x + int(bc)
            bm = int(bm0) << x if x >= 0 else int(bm0) >> (-x)
            cursor_bad = y < lo or y > hi
            if not cursor_bad and (bm & ~allowed) == 0:
                # m ^ bm stays inside the window for every m
                checked += nmask
                continue
            for m in range(nmask):
                pm = m << (window_lo + offset)
                checked += 1
                if ((pm ^ bm) & ~allowed) != 0 or cursor_bad:
                    if found < max_witnesses:
                        wit.append((pm, x, j))
                    found += 1
    return checked, found, wit


class Xoshiro256:
    """xoshiro256** stream, the generator the compiled kernel inlines."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, s0: int, s1: int, s2: int, s3: int):
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3

    def next(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def below(self, k: int) -> int:
        """Uniform index in range(k) by multiply-shift on the top 32 bits."""
        return ((self.next() >> 32) * k) >> 32

    def state(self) -> tuple[int, int, int, int]:
        return self.s0, self.s1, self.s2, self.s3
