"""Compiled inner loop of the market simulation.

The kernel consumes a caller-supplied block of uniforms so that random
number generation stays in numpy (Philox streams) and the compiled code is
a pure function of its inputs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

SIGNAL_POWER = 0
SIGNAL_AFFINE = 1


@njit(cache=True, nogil=True)
def _rerank(counts, pos_order, sigma):
    # stable sort on -counts: ties keep ascending item index
    order = np.argsort(-counts, kind="mergesort")
    for j in range(order.size):
        sigma[order[j]] = pos_order[j]


@njit(cache=True, nogil=True)
def _record(counts, purchases, period, counters, times, shares, dl_series):
    k = counters[2]
    total = 0.0
    for i in range(counts.size):
        total += counts[i]
    for i in range(counts.size):
        shares[k, i] = counts[i] / total
    times[k] = period
    dl_series[k] = purchases
    counters[2] = k + 1


@njit(cache=True, nogil=True)
def advance(
    counts,
    downloads,
    sigma,
    visibility,
    quality,
    appeal,
    pos_order,
    signal_kind,
    r,
    alpha,
    beta,
    arrival_mode,
    popularity,
    rerank_every,
    uniforms,
    n_periods,
    horizon,
    stride,
    counters,
    times,
    shares,
    dl_series,
):
    """Run ``n_periods`` periods in place.

    ``counters`` holds ``[period, purchases, samples_written]``.  A sample is
    written whenever the period count hits a multiple of ``stride`` or the
    horizon.  Under the arrival convention two uniforms are consumed per
    period (try, then buy); under the purchase convention one.
    """
    n = counts.size
    weights = np.empty(n)
    powc = np.empty(n)
    if signal_kind == SIGNAL_POWER:
        for i in range(n):
            powc[i] = counts[i] ** r
    period = counters[0]
    purchases = counters[1]
    u_idx = 0
    for _ in range(n_periods):
        total_counts = 0.0
        for i in range(n):
            total_counts += counts[i]
        total = 0.0
        for i in range(n):
            if signal_kind == SIGNAL_POWER:
                f = powc[i]
            else:
                f = beta * (counts[i] / total_counts) + alpha * appeal[i]
            w = visibility[sigma[i]] * f
            if not arrival_mode:
                w *= quality[i]
            weights[i] = w
            total += w
        target = uniforms[u_idx] * total
        u_idx += 1
        acc = 0.0
        item = n - 1
        for i in range(n):
            acc += weights[i]
            if acc > target:
                item = i
                break
        bought = True
        if arrival_mode:
            bought = uniforms[u_idx] < quality[item]
            u_idx += 1
        if bought:
            counts[item] += 1.0
            downloads[item] += 1.0
            purchases += 1
            if signal_kind == SIGNAL_POWER:
                powc[item] = counts[item] ** r
        period += 1
        if popularity and period % rerank_every == 0:
            _rerank(counts, pos_order, sigma)
        if period % stride == 0 or period == horizon:
            _record(counts, purchases, period, counters, times, shares, dl_series)
    counters[0] = period
    counters[1] = purchases
