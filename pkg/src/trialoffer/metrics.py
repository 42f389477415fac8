"""Ensemble statistics: unpredictability, Mann-Whitney U, efficiency curves."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigMismatchError, SizeError
from .sim import RunRecord, TimeConvention

__all__ = [
    "EnsembleStats",
    "unpredictability",
    "MannWhitneyResult",
    "mann_whitney_u",
    "EfficiencyCurve",
    "efficiency_curve",
]

EXACT_MAX_SIZE = 8


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Unpredictability of an ensemble of worlds.

    ``per_item[i]`` is the mean absolute difference of item ``i``'s final
    share over all pairs of worlds and ``overall`` its mean over items.
    ``per_world[w]`` averages the same pairwise differences over the pairs
    that involve world ``w`` only; the mean of ``per_world`` equals
    ``overall``.
    """

    per_item: np.ndarray
    overall: float
    per_world: np.ndarray
    final_shares: np.ndarray

    def to_dict(self) -> dict:
        return {
            "per_item": self.per_item.tolist(),
            "overall": self.overall,
            "per_world": self.per_world.tolist(),
            "final_shares": self.final_shares.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def unpredictability(final_shares: np.ndarray | Sequence[Sequence[float]]) -> EnsembleStats:
    shares = np.asarray(final_shares, dtype=float)
    if shares.ndim != 2 or shares.shape[0] < 2:
        raise SizeError("unpredictability needs at least two worlds")
    W, n = shares.shape
    # diffs[w, w', i] = |phi_{i,w} - phi_{i,w'}|
    diffs = np.abs(shares[:, None, :] - shares[None, :, :])
    pairs = W * (W - 1) / 2
    per_item = diffs.sum(axis=(0, 1)) / 2.0 / pairs
    per_world = diffs.sum(axis=1).mean(axis=1) / (W - 1)
    return EnsembleStats(per_item, float(per_item.mean()), per_world, shares)


class MannWhitneyResult(NamedTuple):
    statistic: float
    pvalue: float


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def mann_whitney_u(
    sample_a: Sequence[float],
    sample_b: Sequence[float],
    alternative: str = "two_sided",
) -> MannWhitneyResult:
    """Rank-sum test on two independent samples.

    ``statistic`` is ``U_a``, the number of (a, b) pairs with ``a > b``
    (ties count one half).  ``alternative="a_less"`` tests whether ``a``
    tends to be smaller than ``b``.

    When both samples have at most 8 values the p-value is exact: the
    statistic is recomputed for every way of splitting the pooled midranks
    into groups of the observed sizes, which also handles ties exactly.
    Larger samples use the normal approximation with tie and continuity
    corrections.
    """
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise SizeError("both samples must be nonempty")
    if alternative not in ("a_less", "a_greater", "two_sided"):
        raise ValueError(f"unknown alternative {alternative!r}")
    na, nb = a.size, b.size
    ranks = _midranks(np.concatenate([a, b]))
    offset = na * (na + 1) / 2.0
    u_a = float(ranks[:na].sum() - offset)
    mean = na * nb / 2.0

    if na <= EXACT_MAX_SIZE and nb <= EXACT_MAX_SIZE:
        # doubled ranks are integers, so comparisons below are exact
        twice = np.rint(2 * ranks).astype(np.int64)
        obs = int(twice[:na].sum())
        le = ge = total = 0
        for combo in itertools.combinations(range(na + nb), na):
            s = int(twice[list(combo)].sum())
            le += s <= obs
            ge += s >= obs
            total += 1
        p_less, p_greater = le / total, ge / total
    else:
        N = na + nb
        _, counts = np.unique(ranks, return_counts=True)
        tie_term = float(np.sum(counts**3 - counts)) / (N * (N - 1))
        var = na * nb / 12.0 * ((N + 1) - tie_term)
        if var <= 0:
            return MannWhitneyResult(u_a, 1.0)
        sd = math.sqrt(var)
        p_less = _norm_cdf((u_a - mean + 0.5) / sd)
        p_greater = 1.0 - _norm_cdf((u_a - mean - 0.5) / sd)

    if alternative == "a_less":
        p = p_less
    elif alternative == "a_greater":
        p = p_greater
    else:
        p = min(1.0, 2.0 * min(p_less, p_greater))
    return MannWhitneyResult(u_a, float(min(p, 1.0)))


@dataclass(frozen=True, eq=False)
class EfficiencyCurve:
    periods: np.ndarray
    mean_downloads: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["period", "mean_downloads"])
        for t, m in zip(self.periods.tolist(), self.mean_downloads.tolist()):
            writer.writerow([t, repr(m)])
        return buf.getvalue()


def efficiency_curve(records: Sequence[RunRecord]) -> EfficiencyCurve:
    """Pointwise mean over worlds of cumulative downloads per period."""
    if not records:
        raise SizeError("no records given")
    first = records[0]
    for rec in records:
        if rec.config.time_convention is not TimeConvention.ARRIVAL:
            raise ConfigMismatchError("efficiency curves need the arrival time convention")
        if (
            rec.config.iterations != first.config.iterations
            or rec.config.sample_stride != first.config.sample_stride
            or not np.array_equal(rec.times, first.times)
        ):
            raise ConfigMismatchError("records differ in horizon or sampling grid")
    series = np.stack([rec.downloads_series for rec in records]).astype(float)
    return EfficiencyCurve(first.times.copy(), series.mean(axis=0))
