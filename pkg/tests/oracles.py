"""Independent reference implementations used to cross-check the package.

These deliberately avoid the package's search code paths: the segment
neighborhood dynamic program solves for the best partition at each fixed
number of changes and then applies the penalty, and the exhaustive oracle
enumerates every admissible changepoint set outright.
"""

import itertools
import math

import numpy as np

VAR_FLOOR = 1e-12


def gaussian_cost(values, mbic: bool) -> float:
    v = np.asarray(values, dtype=float)
    var = max(float(np.mean((v - v.mean()) ** 2)), VAR_FLOOR)
    c = v.size * (math.log(2.0 * math.pi * var) + 1.0)
    if mbic:
        c += math.log(v.size)
    return c


def penalty_for(values_len: int, penalty) -> float:
    if penalty == "BIC":
        return 3.0 * math.log(values_len)
    if penalty == "MBIC":
        return 4.0 * math.log(values_len)
    return float(penalty)


def objective(values, cps, penalty) -> float:
    v = np.asarray(values, dtype=float)
    mbic = penalty == "MBIC"
    bounds = [0] + sorted(cps) + [v.size]
    return sum(
        gaussian_cost(v[a:b], mbic) for a, b in zip(bounds[:-1], bounds[1:])
    ) + penalty_for(v.size, penalty) * len(cps)


def exhaustive_partition(values, min_seg_len, penalty, max_changes=4):
    """Enumerate every changepoint set with up to max_changes changes."""
    v = np.asarray(values, dtype=float)
    n = v.size
    positions = range(min_seg_len, n - min_seg_len + 1)
    best_set, best_obj = [], objective(v, [], penalty)
    for k in range(1, max_changes + 1):
        for combo in itertools.combinations(positions, k):
            ok = all(b - a >= min_seg_len for a, b in zip(combo, combo[1:]))
            if not ok:
                continue
            obj = objective(v, list(combo), penalty)
            if obj < best_obj - 1e-12:
                best_set, best_obj = list(combo), obj
    return best_set, best_obj


def segment_neighborhood(values, min_seg_len, penalty, k_max=8):
    """Optimal partition via the exact-k dynamic program, then penalty over k."""
    v = np.asarray(values, dtype=float)
    n = v.size
    mbic = penalty == "MBIC"
    beta = penalty_for(n, penalty)
    s1 = np.concatenate([[0.0], np.cumsum(v)])
    s2 = np.concatenate([[0.0], np.cumsum(v * v)])

    def costs_to(t, taus):
        taus = np.asarray(taus)
        m = t - taus
        mean = (s1[t] - s1[taus]) / m
        var = np.maximum((s2[t] - s2[taus]) / m - mean * mean, VAR_FLOOR)
        c = m * (np.log(2.0 * math.pi * var) + 1.0)
        if mbic:
            c = c + np.log(m)
        return c

    feasible_max = n // min_seg_len - 1
    k_max = min(k_max, feasible_max)
    inf = np.inf
    # opt[k][t]: best cost of splitting v[:t] into k+1 segments, each >= L.
    opt = np.full((k_max + 1, n + 1), inf)
    arg = np.zeros((k_max + 1, n + 1), dtype=int)
    for t in range(min_seg_len, n + 1):
        opt[0][t] = costs_to(t, [0])[0]
    for k in range(1, k_max + 1):
        t_min = (k + 1) * min_seg_len
        for t in range(t_min, n + 1):
            taus = np.arange(k * min_seg_len, t - min_seg_len + 1)
            prev = opt[k - 1][taus]
            tot = prev + costs_to(t, taus)
            i = int(np.argmin(tot))
            opt[k][t] = tot[i]
            arg[k][t] = taus[i]

    totals = [opt[k][n] + beta * k for k in range(k_max + 1)]
    best_k = int(np.argmin(totals))
    if best_k == k_max and k_max < feasible_max:
        raise RuntimeError("segment neighborhood hit its k cap")
    cps = []
    t, k = n, best_k
    while k > 0:
        t = int(arg[k][t])
        cps.append(t)
        k -= 1
    return sorted(cps), float(totals[best_k])


def rasterize_midpoints(events, resolution_s):
    """Brute-force midpoint rasterizer: scan every event for every cell."""
    start = events[0][0]
    end = events[-1][0] + events[-1][1]
    n = int(round((end - start) / resolution_s))
    out = []
    for k in range(n):
        mid = start + (k + 0.5) * resolution_s
        for (s0, dur, label) in events:
            if s0 <= mid < s0 + dur:
                out.append(label)
                break
        else:
            out.append(events[-1][2])
    return out


def autocov_by_lag(values, max_lag=25):
    """Biased autocovariances by direct summation."""
    v = np.asarray(values, dtype=float)
    n = v.size
    mean = v.mean()
    out = []
    for lag in range(1, max_lag + 1):
        total = 0.0
        for t in range(n - lag):
            total += (v[t] - mean) * (v[t + lag] - mean)
        out.append(total / n)
    return out
