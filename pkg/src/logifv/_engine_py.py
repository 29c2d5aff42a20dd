"""Pure-Python event-loop kernel for the particle system.

This is the fallback lane and the semantic reference for the compiled kernel
in ``_engine_cy.pyx``. Both lanes consume the identical uniform stream (the
raw double stream of the replicate's bit generator) with the same arithmetic
in the same order, so given the same seed they produce bit-identical
trajectories. Any change here must be mirrored there.

Stream discipline per event:

1. one uniform for the exponential waiting time,
2. one uniform for the birth/death split,
3. one uniform for the individual (type) pick through the Fenwick index,
4. births only: one uniform for the offspring head table, plus two uniforms
   per rejection round when the draw falls in the zeta tail.
"""
from __future__ import annotations

import math

import numpy as np

# uniforms are pre-drawn in blocks; block size does not affect the stream
BLOCK = 1 << 14

# Pareto tail draws above this would overflow int64 after floor
_Y_GUARD = 8.9e18


class UniformStream:
    """Scalar view of a bit generator's double stream (for single stepping)."""

    __slots__ = ("_gen", "_buf", "_pos")

    def __init__(self, bit_generator: np.random.BitGenerator):
        self._gen = np.random.Generator(bit_generator)
        self._buf = self._gen.random(BLOCK).tolist()
        self._pos = 0

    def next(self) -> float:
        if self._pos == BLOCK:
            self._buf = self._gen.random(BLOCK).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


class Fenwick:
    """Prefix-sum index over per-type counts for O(log T) weighted picks."""

    __slots__ = ("size", "tree", "top_bit")

    def __init__(self, counts):
        self.size = len(counts)
        self.tree = [0] * (self.size + 1)
        for i, v in enumerate(counts, start=1):
            self.tree[i] += int(v)
            j = i + (i & -i)
            if j <= self.size:
                self.tree[j] += self.tree[i]
        bit = 1
        while bit * 2 <= self.size:
            bit *= 2
        self.top_bit = bit

    def add(self, idx: int, delta: int) -> None:
        i = idx + 1
        while i <= self.size:
            self.tree[i] += delta
            i += i & -i

    def find(self, target: float) -> int:
        """Smallest 0-based index whose prefix sum exceeds ``target``."""
        idx = 0
        bit = self.top_bit
        rem = target
        tree = self.tree
        while bit:
            nxt = idx + bit
            if nxt <= self.size and tree[nxt] <= rem:
                idx = nxt
                rem -= tree[nxt]
            bit >>= 1
        if idx >= self.size:  # only reachable through float tie pathologies
            idx = self.size - 1
        return idx


def draw_offspring(stream: UniformStream, head_cum, is_zeta: bool,
                   alpha: float, cut: int) -> int:
    """One offspring count from the law; same stream pattern as the kernel."""
    u = stream.next()
    high = len(head_cum)
    if not is_zeta or u < head_cum[high - 1]:
        lo = 0
        while lo < high:
            mid = (lo + high) >> 1
            if u < head_cum[mid]:
                high = mid
            else:
                lo = mid + 1
        return lo + 1
    inv_alpha = -1.0 / alpha
    while True:
        u1 = stream.next()
        y = cut * u1 ** inv_alpha if u1 > 0.0 else math.inf
        if y > _Y_GUARD:
            y = _Y_GUARD
        k = int(y) + 1
        accept = alpha / (k * math.expm1(-alpha * math.log1p(-1.0 / k)))
        if stream.next() <= accept:
            return k


def run_sim(counts0, b: float, d: float, c_K: float, head_cum, is_zeta: bool,
            alpha: float, cut: int, obs_raw, bit_generator,
            audit_every: int = 0):
    """Simulate the particle system, recording counts at raw times obs_raw.

    Records carry the left limit: an observation instant that ties with an
    event time reads the pre-event state. Returns (counts_matrix, events,
    final_raw_time) with counts_matrix of shape (len(obs_raw), len(counts0)).
    """
    n_types = len(counts0)
    n_obs = len(obs_raw)
    out = np.zeros((n_obs, n_types), dtype=np.int64)
    counts = [int(x) for x in counts0]
    total = sum(counts)
    fen = Fenwick(counts)
    cum = [float(x) for x in head_cum]
    head_len = len(cum)
    head_top = cum[head_len - 1]
    inv_alpha = -1.0 / alpha if is_zeta else 0.0
    obs = [float(x) for x in obs_raw]

    gen = np.random.Generator(bit_generator)
    buf = gen.random(BLOCK).tolist()
    pos = 0

    t = 0.0
    comp = 0.0  # Kahan compensation for the raw clock
    obs_i = 0
    events = 0
    log1p = math.log1p
    expm1 = math.expm1

    while obs_i < n_obs:
        if total == 0:
            # absorbing: all remaining records keep the zero state
            obs_i = n_obs
            break

        rate_birth = b * total
        rate_total = rate_birth + (d + c_K * total) * total

        if pos == BLOCK:
            buf = gen.random(BLOCK).tolist()
            pos = 0
        u = buf[pos]
        pos += 1
        wait = -log1p(-u) / rate_total
        y = wait - comp
        t_next = t + y
        comp = (t_next - t) - y

        while obs_i < n_obs and obs[obs_i] <= t_next:
            out[obs_i] = counts
            obs_i += 1
        if obs_i >= n_obs:
            break
        t = t_next

        if pos == BLOCK:
            buf = gen.random(BLOCK).tolist()
            pos = 0
        u_evt = buf[pos]
        pos += 1
        if pos == BLOCK:
            buf = gen.random(BLOCK).tolist()
            pos = 0
        u_type = buf[pos]
        pos += 1
        j = fen.find(u_type * total)
        while counts[j] == 0:  # float tie pathology guard
            j = (j + 1) % n_types

        if u_evt * rate_total < rate_birth:
            if pos == BLOCK:
                buf = gen.random(BLOCK).tolist()
                pos = 0
            uk = buf[pos]
            pos += 1
            if is_zeta and uk >= head_top:
                while True:
                    if pos == BLOCK:
                        buf = gen.random(BLOCK).tolist()
                        pos = 0
                    u1 = buf[pos]
                    pos += 1
                    yv = cut * u1 ** inv_alpha if u1 > 0.0 else math.inf
                    if yv > _Y_GUARD:
                        yv = _Y_GUARD
                    k = int(yv) + 1
                    accept = alpha / (k * expm1(-alpha * log1p(-1.0 / k)))
                    if pos == BLOCK:
                        buf = gen.random(BLOCK).tolist()
                        pos = 0
                    u2 = buf[pos]
                    pos += 1
                    if u2 <= accept:
                        break
            else:
                lo = 0
                high = head_len
                while lo < high:
                    mid = (lo + high) >> 1
                    if uk < cum[mid]:
                        high = mid
                    else:
                        lo = mid + 1
                k = lo + 1
            counts[j] += k
            total += k
            fen.add(j, k)
        else:
            counts[j] -= 1
            total -= 1
            fen.add(j, -1)
        events += 1

        if audit_every and events % audit_every == 0:
            if sum(counts) != total:
                raise RuntimeError("count conservation audit failed")
            run = 0
            for i, v in enumerate(counts):
                run += v
                if fen.find(float(run) - 0.5) != i and v > 0:
                    raise RuntimeError("prefix index audit failed")

    return out, events, t
