"""Jitted recursive partitioning shared by survival forests and boosting.

Trees are stored as flat arrays.  Internal nodes hold a feature index and a
threshold; a row goes left when ``x[feature] <= threshold``.  Leaves have
``feature == -1`` and own the slice ``sample_order[start:end]`` of the
(possibly repeated) training rows that reached them.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .rng import bounded

LOGRANK = 0
VARIANCE = 1


@njit(cache=True)
def logrank_from_counts(cnt, dth, cnt_l, dth_l, n_total, n_left, before=0, before_l=0):
    """|Z| of the two-sample log-rank test from per-time counts.

    ``cnt``/``dth`` count subjects/events at each distinct time (ascending)
    for the pooled sample, ``cnt_l``/``dth_l`` the same for group A.
    ``before``/``before_l`` count subjects that left the risk set before the
    first listed time.  Returns 0 when the variance vanishes.
    """
    num = 0.0
    var = 0.0
    for j in range(cnt.shape[0]):
        y = n_total - before
        y_l = n_left - before_l
        d = dth[j]
        if d > 0:
            num += dth_l[j] - y_l * d / y
            if y > 1:
                var += (y_l / y) * (1.0 - y_l / y) * d * (y - d) / (y - 1)
        before += cnt[j]
        before_l += cnt_l[j]
    if var <= 0.0:
        return 0.0
    return abs(num) / np.sqrt(var)


@njit(cache=True)
def _midpoint(lo, hi):
    thr = 0.5 * (lo + hi)
    if thr >= hi:
        thr = lo
    return thr


@njit(cache=True)
def _best_split(X, tidx, event, y, idx, start, end, features, criterion, min_leaf,
                local_bin, cnt, dth, cnt_l, dth_l):
    """Best (feature, threshold, score) over candidate features; feature -1 if none."""
    n = end - start
    best_f = -1
    best_thr = 0.0
    best_score = 0.0

    n_times = 0
    n_events = 0
    total_y = 0.0
    parent = 0.0
    if criterion == LOGRANK:
        # Only the node's event times enter the statistic.  Row s goes to
        # bin b(s) = #(node event times <= t_s): it is at risk at event
        # times 0..b(s)-1 and, if it failed, died at b(s)-1.
        ev_buf = np.empty(n, dtype=np.int64)
        n_ev = 0
        for k in range(n):
            s = idx[start + k]
            if event[s]:
                ev_buf[n_ev] = tidx[s]
                n_ev += 1
        if n_ev < 2:
            return best_f, best_thr, best_score
        ev_t = np.unique(ev_buf[:n_ev])
        n_times = ev_t.shape[0]
        for j in range(n_times + 1):
            cnt[j] = 0
            dth[j] = 0
        for k in range(n):
            s = idx[start + k]
            b = np.searchsorted(ev_t, tidx[s], side="right")
            local_bin[k] = b
            cnt[b] += 1
            if event[s]:
                dth[b - 1] += 1
                n_events += 1
    else:
        for k in range(n):
            total_y += y[idx[start + k]]
        parent = total_y * total_y / n

    vals = np.empty(n)
    for fi in range(features.shape[0]):
        f = features[fi]
        for k in range(n):
            vals[k] = X[idx[start + k], f]
        order = np.argsort(vals, kind="mergesort")
        if vals[order[0]] == vals[order[n - 1]]:
            continue
        if criterion == LOGRANK:
            for j in range(n_times + 1):
                cnt_l[j] = 0
                dth_l[j] = 0
            n_l = 0
            ev_l = 0
            for k in range(n - 1):
                s = idx[start + order[k]]
                b = local_bin[order[k]]
                cnt_l[b] += 1
                n_l += 1
                if event[s]:
                    dth_l[b - 1] += 1
                    ev_l += 1
                lo = vals[order[k]]
                hi = vals[order[k + 1]]
                if lo == hi or n_l < min_leaf or n - n_l < min_leaf:
                    continue
                if ev_l < 1 or n_events - ev_l < 1:
                    continue
                score = logrank_from_counts(cnt[1:n_times + 1], dth[:n_times],
                                            cnt_l[1:n_times + 1], dth_l[:n_times], n, n_l,
                                            cnt[0], cnt_l[0])
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_thr = _midpoint(lo, hi)
        else:
            sum_l = 0.0
            n_l = 0
            for k in range(n - 1):
                sum_l += y[idx[start + order[k]]]
                n_l += 1
                lo = vals[order[k]]
                hi = vals[order[k + 1]]
                if lo == hi or n_l < min_leaf or n - n_l < min_leaf:
                    continue
                sum_r = total_y - sum_l
                score = sum_l * sum_l / n_l + sum_r * sum_r / (n - n_l) - parent
                if score > best_score and score > 1e-12 * parent:
                    best_score = score
                    best_f = f
                    best_thr = _midpoint(lo, hi)
    return best_f, best_thr, best_score


@njit(cache=True)
def grow(X, tidx, event, y, samples, criterion, mtry, min_leaf, max_depth, state):
    """Grow one tree on the rows listed in ``samples`` (repeats allowed).

    ``max_depth < 0`` means unlimited.  Candidate features are drawn per node
    with a partial Fisher-Yates shuffle from ``state`` and scanned in
    ascending index order, so ties go to the lower feature and then to the
    lower threshold.
    """
    n = samples.shape[0]
    m = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    node_start = np.zeros(cap, dtype=np.int64)
    node_end = np.zeros(cap, dtype=np.int64)
    depth_of = np.zeros(cap, dtype=np.int64)
    idx = samples.copy()

    local_bin = np.zeros(n, dtype=np.int64)
    cnt = np.zeros(n + 1, dtype=np.int64)
    dth = np.zeros(n + 1, dtype=np.int64)
    cnt_l = np.zeros(n + 1, dtype=np.int64)
    dth_l = np.zeros(n + 1, dtype=np.int64)
    feat_pool = np.arange(m)
    buf = np.empty(n, dtype=np.int64)

    stack = np.empty(cap, dtype=np.int64)
    top = 0
    n_nodes = 1
    node_start[0] = 0
    node_end[0] = n
    stack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        node = stack[top]
        start = node_start[node]
        end = node_end[node]
        size = end - start
        if (max_depth >= 0 and depth_of[node] >= max_depth) or size < 2 * min_leaf or size < 2:
            continue
        for i in range(mtry):
            j = i + bounded(state, m - i)
            tmp = feat_pool[i]
            feat_pool[i] = feat_pool[j]
            feat_pool[j] = tmp
        feats = np.sort(feat_pool[:mtry].copy())
        f, thr, score = _best_split(X, tidx, event, y, idx, start, end, feats, criterion,
                                    min_leaf, local_bin, cnt, dth, cnt_l, dth_l)
        if f < 0:
            continue
        # stable partition
        n_l = 0
        for k in range(start, end):
            if X[idx[k], f] <= thr:
                buf[n_l] = idx[k]
                n_l += 1
        r = n_l
        for k in range(start, end):
            if X[idx[k], f] > thr:
                buf[r] = idx[k]
                r += 1
        for k in range(size):
            idx[start + k] = buf[k]
        feature[node] = f
        threshold[node] = thr
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        node_start[lc] = start
        node_end[lc] = start + n_l
        node_start[rc] = start + n_l
        node_end[rc] = end
        depth_of[lc] = depth_of[node] + 1
        depth_of[rc] = depth_of[node] + 1
        stack[top] = rc
        top += 1
        stack[top] = lc
        top += 1
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), node_start[:n_nodes].copy(), node_end[:n_nodes].copy(),
            idx)


@njit(cache=True)
def apply(feature, threshold, left, right, X):
    """Node index of the leaf each row of X lands in."""
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True)
def bootstrap(state, n):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = bounded(state, n)
    return out


@njit(cache=True)
def leaf_summaries(feature, node_start, node_end, idx, tidx, event, times, is_event_time,
                   horizon):
    """Per-leaf scalar summaries over the global training time grid.

    Returns (mortality, km_area) indexed by node: mortality sums the leaf's
    Nelson-Aalen cumulative hazard over all training event times; km_area
    integrates the leaf's Kaplan-Meier curve over ``[0, times[horizon]]``.
    Values for internal nodes are left at 0.
    """
    n_nodes = feature.shape[0]
    n_times = times.shape[0]
    mortality = np.zeros(n_nodes)
    km_area = np.zeros(n_nodes)
    cnt = np.zeros(n_times, dtype=np.int64)
    dth = np.zeros(n_times, dtype=np.int64)
    for node in range(n_nodes):
        if feature[node] >= 0:
            continue
        cnt[:] = 0
        dth[:] = 0
        size = node_end[node] - node_start[node]
        for k in range(node_start[node], node_end[node]):
            s = idx[k]
            cnt[tidx[s]] += 1
            if event[s]:
                dth[tidx[s]] += 1
        at_risk = size
        chf = 0.0
        surv = 1.0
        prev_t = 0.0
        mort = 0.0
        area = 0.0
        for j in range(n_times):
            if j <= horizon:
                area += surv * (times[j] - prev_t)
                prev_t = times[j]
            if dth[j] > 0:
                chf += dth[j] / at_risk
                surv *= 1.0 - dth[j] / at_risk
            if is_event_time[j]:
                mort += chf
            at_risk -= cnt[j]
        mortality[node] = mort
        km_area[node] = area
    return mortality, km_area
