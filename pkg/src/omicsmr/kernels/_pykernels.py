"""NumPy implementations of the hot kernels.

Drop-in twins of the compiled versions in ``_ckernels``; the selector in
``kernels.__init__`` picks whichever is importable. Both backends follow
the same operation order so seeded runs agree across them.
"""

from __future__ import annotations

import numpy as np


def clump_greedy(order, p, pos, chrom, r2, p1, p2, r2_min, window_bp):
    """Greedy index-SNP selection.

    ``order`` visits SNPs by (p, pos, rsid); the first unassigned SNP with
    p <= p1 becomes an index and absorbs every unassigned SNP on the same
    chromosome within ``window_bp`` of it that has p <= p2 and r2 >= r2_min
    against it.

    Returns (index_ids, assign) where assign[j] is the clump id of SNP j
    (-1 when unassigned) and index_ids[cid] is the index SNP of clump cid.
    """
    n = p.shape[0]
    assign = np.full(n, -1, dtype=np.int64)
    index_ids = []
    for i in order:
        if assign[i] != -1:
            continue
        if p[i] > p1:
            break  # order is sorted by p, nothing later can be an index
        cid = len(index_ids)
        index_ids.append(i)
        assign[i] = cid
        members = (
            (assign == -1)
            & (chrom == chrom[i])
            & (np.abs(pos - pos[i]) <= window_bp)
            & (p <= p2)
            & (r2[i] >= r2_min)
        )
        assign[members] = cid
    return np.asarray(index_ids, dtype=np.int64), assign


def weighted_median_sorted(theta, w):
    """Weight-percentile median of already-sorted ratio estimates.

    ``theta`` must be ascending; ``w`` carries the matching weights
    (any positive scale). The estimate interpolates theta at cumulative
    percentile 0.5, with percentiles p_j = cumsum(w_norm)_j - w_norm_j / 2.
    """
    wn = w / np.sum(w)
    pc = np.cumsum(wn) - wn / 2.0
    return _interp_half(theta, pc)


def _interp_half(theta, pc):
    m = theta.shape[0]
    j = int(np.searchsorted(pc, 0.5, side="left"))
    if j == 0:
        return float(theta[0])
    if j >= m:
        return float(theta[m - 1])
    d = pc[j] - pc[j - 1]
    if d <= 0:
        return float(theta[j])
    return float(theta[j - 1] + (theta[j] - theta[j - 1]) * (0.5 - pc[j - 1]) / d)


def wm_bootstrap(theta_draws, w):
    """Weighted median of each row of ``theta_draws`` under fixed weights.

    Rows are parametric-bootstrap ratio draws; returns the per-row medians.
    """
    n_boot, m = theta_draws.shape
    idx = np.argsort(theta_draws, axis=1, kind="stable")
    th = np.take_along_axis(theta_draws, idx, axis=1)
    ws = w[idx]
    wn = ws / np.sum(ws, axis=1, keepdims=True)
    pc = np.cumsum(wn, axis=1) - wn / 2.0

    j = np.sum(pc < 0.5, axis=1)
    out = np.empty(n_boot, dtype=float)
    rows = np.arange(n_boot)

    at_start = j == 0
    at_end = j >= m
    inner = ~(at_start | at_end)
    out[at_start] = th[at_start, 0]
    out[at_end] = th[at_end, m - 1]

    ji = j[inner]
    ri = rows[inner]
    lo = pc[ri, ji - 1]
    hi = pc[ri, ji]
    d = hi - lo
    flat = d <= 0
    val = np.where(
        flat,
        th[ri, ji],
        th[ri, ji - 1] + (th[ri, ji] - th[ri, ji - 1]) * (0.5 - lo) / np.where(flat, 1.0, d),
    )
    out[inner] = val
    return out


def neighbor_states(state, k, kmin, kmax):
    """Add/delete/swap neighborhood of a model bitmask, size-bounded.

    Enumeration order (adds by ascending bit, then deletes, then swaps) is
    part of the contract: the chain samples by cumulative weight, so the
    order must match across backends.
    """
    size = bin(state).count("1")
    members = [i for i in range(k) if state >> i & 1]
    absent = [j for j in range(k) if not state >> j & 1]
    out = []
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


def sss_chain(start, k, kmin, kmax, uniforms, score_fn, score_cache, visits,
              hood_cache=None, hood_cache_limit=100_000):
    """Run one shotgun-stochastic-search chain over model bitmasks.

    Each step samples the next model from the add/delete/swap neighborhood
    of the current one, with probability proportional to exp(score). Scores
    are taken from ``score_cache`` and computed via ``score_fn`` at most
    once per model. ``visits`` accumulates per-state visit counts (the state
    at the top of each iteration).
    """
    if hood_cache is None:
        hood_cache = {}
    state = start
    if state not in score_cache:
        score_cache[state] = score_fn(state)
    n_iter = uniforms.shape[0]
    for t in range(n_iter):
        visits[state] = visits.get(state, 0) + 1
        hood = hood_cache.get(state)
        if hood is None:
            neighbors = neighbor_states(state, k, kmin, kmax)
            if not neighbors:
                continue
            scores = np.empty(len(neighbors), dtype=float)
            for i, nb in enumerate(neighbors):
                s = score_cache.get(nb)
                if s is None:
                    s = score_fn(nb)
                    score_cache[nb] = s
                scores[i] = s
            cumw = np.cumsum(np.exp(scores - scores.max()))
            if len(hood_cache) >= hood_cache_limit:
                hood_cache.clear()
            hood = (neighbors, cumw)
            hood_cache[state] = hood
        neighbors, cumw = hood
        u = uniforms[t] * cumw[-1]
        idx = int(np.searchsorted(cumw, u, side="right"))
        if idx >= len(neighbors):
            idx = len(neighbors) - 1
        state = neighbors[idx]
    return state
