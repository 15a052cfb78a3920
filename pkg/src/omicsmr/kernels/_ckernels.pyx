# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Mirrors ``_pykernels`` operation for operation; seeded runs must agree with
the fallback. Greedy clumping and the bootstrap run fully native; the
stochastic-search chain keeps numpy for exp/cumsum so both backends round
identically, and compiles the bookkeeping around them.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def clump_greedy(cnp.int64_t[::1] order,
                 double[::1] p,
                 cnp.int64_t[::1] pos,
                 cnp.int64_t[::1] chrom,
                 double[:, ::1] r2,
                 double p1,
                 double p2,
                 double r2_min,
                 cnp.int64_t window_bp):
    """Greedy index-SNP selection; see the fallback for the contract."""
    cdef Py_ssize_t n = p.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] assign_arr = np.full(n, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] assign = assign_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] index_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] index_ids = index_arr
    cdef Py_ssize_t oi, i, j
    cdef cnp.int64_t cid = 0
    cdef cnp.int64_t ci, cpos

    for oi in range(order.shape[0]):
        i = order[oi]
        if assign[i] != -1:
            continue
        if p[i] > p1:
            break
        index_ids[cid] = i
        assign[i] = cid
        ci = chrom[i]
        cpos = pos[i]
        for j in range(n):
            if assign[j] != -1:
                continue
            if chrom[j] != ci:
                continue
            if pos[j] > cpos + window_bp or pos[j] < cpos - window_bp:
                continue
            if p[j] > p2:
                continue
            if r2[i, j] < r2_min:
                continue
            assign[j] = cid
        cid += 1
    return index_arr[:cid].copy(), assign_arr


cdef double _interp_half_c(double* theta, double* pc, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = m, mid
    # first index with pc[idx] >= 0.5 (searchsorted side='left')
    while lo < hi:
        mid = (lo + hi) >> 1
        if pc[mid] < 0.5:
            lo = mid + 1
        else:
            hi = mid
    cdef Py_ssize_t j = lo
    if j == 0:
        return theta[0]
    if j >= m:
        return theta[m - 1]
    cdef double d = pc[j] - pc[j - 1]
    if d <= 0:
        return theta[j]
    return theta[j - 1] + (theta[j] - theta[j - 1]) * (0.5 - pc[j - 1]) / d


def weighted_median_sorted(double[::1] theta, double[::1] w):
    """Weight-percentile median of already-sorted ratio estimates."""
    cdef Py_ssize_t m = theta.shape[0]
    cdef cnp.ndarray[double, ndim=1] pc_arr = np.empty(m, dtype=float)
    cdef double[::1] pc = pc_arr
    cdef double total = 0.0, run = 0.0, wn
    cdef Py_ssize_t i
    for i in range(m):
        total += w[i]
    for i in range(m):
        wn = w[i] / total
        run += wn
        pc[i] = run - wn / 2.0
    return _interp_half_c(&theta[0], &pc[0], m)


def wm_bootstrap(double[:, ::1] theta_draws, double[::1] w):
    """Weighted median of each row of bootstrap ratio draws, fixed weights."""
    cdef Py_ssize_t n_boot = theta_draws.shape[0]
    cdef Py_ssize_t m = theta_draws.shape[1]
    cdef cnp.ndarray[double, ndim=1] out_arr = np.empty(n_boot, dtype=float)
    cdef double[::1] out = out_arr
    cdef cnp.ndarray[double, ndim=1] th_arr = np.empty(m, dtype=float)
    cdef cnp.ndarray[double, ndim=1] ws_arr = np.empty(m, dtype=float)
    cdef cnp.ndarray[double, ndim=1] pc_arr = np.empty(m, dtype=float)
    cdef double[::1] th = th_arr
    cdef double[::1] ws = ws_arr
    cdef double[::1] pc = pc_arr
    cdef Py_ssize_t b, i, j
    cdef double tv, wv, total, run, wn

    with nogil:
        for b in range(n_boot):
            # insertion sort of (theta, w) pairs by theta; rows are small
            for i in range(m):
                tv = theta_draws[b, i]
                wv = w[i]
                j = i
                while j > 0 and th[j - 1] > tv:
                    th[j] = th[j - 1]
                    ws[j] = ws[j - 1]
                    j -= 1
                th[j] = tv
                ws[j] = wv
            total = 0.0
            for i in range(m):
                total += ws[i]
            run = 0.0
            for i in range(m):
                wn = ws[i] / total
                run += wn
                pc[i] = run - wn / 2.0
            out[b] = _interp_half_c(&th[0], &pc[0], m)
    return out_arr


def neighbor_states(state, Py_ssize_t k, Py_ssize_t kmin, Py_ssize_t kmax):
    """Add/delete/swap neighborhood, in the shared enumeration order."""
    cdef Py_ssize_t size = 0, i, j
    cdef list members = [], absent = [], out = []
    for i in range(k):
        if (state >> i) & 1:
            members.append(i)
            size += 1
        else:
            absent.append(i)
    if size + 1 <= kmax:
        for j in absent:
            out.append(state | (1 << j))
    if size - 1 >= kmin:
        for i in members:
            out.append(state & ~(1 << i))
    for i in members:
        removed = state ^ (1 << i)
        for j in absent:
            out.append(removed | (1 << j))
    return out


def sss_chain(start, Py_ssize_t k, Py_ssize_t kmin, Py_ssize_t kmax,
              double[::1] uniforms, score_fn, dict score_cache, dict visits,
              hood_cache=None, Py_ssize_t hood_cache_limit=100_000):
    """One shotgun-stochastic-search chain; see the fallback for semantics."""
    cdef dict hoods = hood_cache if hood_cache is not None else {}
    cdef Py_ssize_t n_iter = uniforms.shape[0]
    cdef Py_ssize_t t, idx, nn, lo, hi, mid
    cdef double u
    cdef double[::1] cumw_view
    cdef list neighbors
    cdef tuple hood

    state = start
    if state not in score_cache:
        score_cache[state] = score_fn(state)
    for t in range(n_iter):
        visits[state] = visits.get(state, 0) + 1
        cached = hoods.get(state)
        if cached is None:
            neighbors = neighbor_states(state, k, kmin, kmax)
            nn = len(neighbors)
            if nn == 0:
                continue
            scores = np.empty(nn, dtype=float)
            for idx in range(nn):
                nb = neighbors[idx]
                s = score_cache.get(nb)
                if s is None:
                    s = score_fn(nb)
                    score_cache[nb] = s
                scores[idx] = s
            # exp/cumsum stay in numpy so both backends round identically
            cumw = np.cumsum(np.exp(scores - scores.max()))
            if len(hoods) >= hood_cache_limit:
                hoods.clear()
            hood = (neighbors, cumw)
            hoods[state] = hood
        else:
            hood = <tuple>cached
        neighbors = <list>hood[0]
        cumw_view = hood[1]
        nn = cumw_view.shape[0]
        u = uniforms[t] * cumw_view[nn - 1]
        lo = 0
        hi = nn
        # searchsorted side='right': first index with cumw[idx] > u
        while lo < hi:
            mid = (lo + hi) >> 1
            if cumw_view[mid] <= u:
                lo = mid + 1
            else:
                hi = mid
        idx = lo
        if idx >= nn:
            idx = nn - 1
        state = neighbors[idx]
    return state
