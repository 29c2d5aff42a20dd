# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled event-loop kernel for the particle system.

Mirror of ``_engine_py.run_sim``: same uniform stream (the bit generator's
raw double stream), same arithmetic expressions in the same order, same libm
calls, so the two lanes produce bit-identical trajectories from the same
seed. The extension is compiled with floating-point contraction disabled to
keep the arithmetic literal. Any change here must be mirrored there.
"""
import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport INFINITY, expm1, log1p, pow
from numpy.random cimport bitgen_t

# Pareto tail draws above this would overflow int64 after floor
cdef double _Y_GUARD = 8.9e18

ctypedef long long i64


cdef inline void fen_build(i64 *tree, const i64 *counts,
                           Py_ssize_t size) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(1, size + 1):
        tree[i] += counts[i - 1]
        j = i + (i & (-i))
        if j <= size:
            tree[j] += tree[i]


cdef inline void fen_add(i64 *tree, Py_ssize_t size, Py_ssize_t idx,
                         i64 delta) noexcept nogil:
    cdef Py_ssize_t i = idx + 1
    while i <= size:
        tree[i] += delta
        i += i & (-i)


cdef inline Py_ssize_t fen_find(const i64 *tree, Py_ssize_t size,
                                Py_ssize_t top_bit,
                                double target) noexcept nogil:
    """Smallest 0-based index whose prefix sum exceeds ``target``."""
    cdef Py_ssize_t idx = 0, nxt, bit = top_bit
    cdef double rem = target
    while bit:
        nxt = idx + bit
        if nxt <= size and <double> tree[nxt] <= rem:
            idx = nxt
            rem -= <double> tree[nxt]
        bit >>= 1
    if idx >= size:  # only reachable through float tie pathologies
        idx = size - 1
    return idx


cdef int _loop(bitgen_t *rng, i64 *counts, i64 total, Py_ssize_t n_types,
               i64 *tree, Py_ssize_t top_bit, double b, double d, double c_K,
               const double *cum, Py_ssize_t head_len, bint is_zeta,
               double alpha, i64 cut, const double *obs, Py_ssize_t n_obs,
               i64 *out, i64 audit_every, i64 *events_out,
               double *t_out) noexcept nogil:
    cdef double head_top = cum[head_len - 1]
    cdef double inv_alpha = -1.0 / alpha if is_zeta else 0.0
    cdef double t = 0.0, comp = 0.0
    cdef double u, wait, y, t_next, u_evt, u_type, uk, u1, u2, yv, accept
    cdef double rate_birth, rate_total
    cdef Py_ssize_t obs_i = 0, j, q, lo, mid, high
    cdef i64 events = 0, k, run
    cdef int status = 0

    while obs_i < n_obs:
        if total == 0:
            obs_i = n_obs
            break

        rate_birth = b * total
        rate_total = rate_birth + (d + c_K * total) * total

        u = rng.next_double(rng.state)
        wait = -log1p(-u) / rate_total
        y = wait - comp
        t_next = t + y
        comp = (t_next - t) - y

        while obs_i < n_obs and obs[obs_i] <= t_next:
            for q in range(n_types):
                out[obs_i * n_types + q] = counts[q]
            obs_i += 1
        if obs_i >= n_obs:
            break
        t = t_next

        u_evt = rng.next_double(rng.state)
        u_type = rng.next_double(rng.state)
        j = fen_find(tree, n_types, top_bit, u_type * total)
        while counts[j] == 0:  # float tie pathology guard
            j = (j + 1) % n_types

        if u_evt * rate_total < rate_birth:
            uk = rng.next_double(rng.state)
            if is_zeta and uk >= head_top:
                while True:
                    u1 = rng.next_double(rng.state)
                    yv = cut * pow(u1, inv_alpha) if u1 > 0.0 else INFINITY
                    if yv > _Y_GUARD:
                        yv = _Y_GUARD
                    k = <i64> yv + 1
                    accept = alpha / (k * expm1(-alpha * log1p(-1.0 / k)))
                    u2 = rng.next_double(rng.state)
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
            fen_add(tree, n_types, j, k)
        else:
            counts[j] -= 1
            total -= 1
            fen_add(tree, n_types, j, -1)
        events += 1

        if audit_every and events % audit_every == 0:
            run = 0
            for q in range(n_types):
                run += counts[q]
            if run != total:
                status = 1
                break
            run = 0
            for q in range(n_types):
                run += counts[q]
                if (fen_find(tree, n_types, top_bit, <double> run - 0.5) != q
                        and counts[q] > 0):
                    status = 2
                    break
            if status:
                break

    events_out[0] = events
    t_out[0] = t
    return status


def run_sim(counts0, double b, double d, double c_K, head_cum, bint is_zeta,
            double alpha, long long cut, obs_raw, bit_generator,
            long long audit_every=0):
    """Simulate the particle system, recording counts at raw times obs_raw.

    Records carry the left limit: an observation instant that ties with an
    event time reads the pre-event state. Returns (counts_matrix, events,
    final_raw_time) with counts_matrix of shape (len(obs_raw), len(counts0)).
    """
    # the loop mutates counts in place, so the caller's array must be copied
    counts_arr = np.array(counts0, dtype=np.int64, order="C", copy=True)
    cum_arr = np.ascontiguousarray(head_cum, dtype=np.float64)
    obs_arr = np.ascontiguousarray(obs_raw, dtype=np.float64)
    cdef Py_ssize_t n_types = counts_arr.shape[0]
    cdef Py_ssize_t n_obs = obs_arr.shape[0]
    out_arr = np.zeros((n_obs, n_types), dtype=np.int64)
    tree_arr = np.zeros(n_types + 1, dtype=np.int64)
    if n_obs == 0 or n_types == 0:
        return out_arr, 0, 0.0

    cdef i64[::1] counts_mv = counts_arr
    cdef i64[::1] tree_mv = tree_arr
    cdef double[::1] cum_mv = cum_arr
    cdef double[::1] obs_mv = obs_arr
    cdef i64[:, ::1] out_mv = out_arr

    cdef i64 total = 0
    cdef Py_ssize_t i
    for i in range(n_types):
        total += counts_mv[i]
    fen_build(&tree_mv[0], &counts_mv[0], n_types)
    cdef Py_ssize_t top_bit = 1
    while top_bit * 2 <= n_types:
        top_bit *= 2

    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(
        bit_generator.capsule, "BitGenerator")
    cdef i64 events = 0
    cdef double t_final = 0.0
    cdef int status
    with nogil:
        status = _loop(rng, &counts_mv[0], total, n_types, &tree_mv[0],
                       top_bit, b, d, c_K, &cum_mv[0], cum_mv.shape[0],
                       is_zeta, alpha, cut, &obs_mv[0], n_obs,
                       &out_mv[0, 0], audit_every, &events, &t_final)
    if status == 1:
        raise RuntimeError("count conservation audit failed")
    if status == 2:
        raise RuntimeError("prefix index audit failed")
    return out_arr, int(events), float(t_final)
