"""Market description and the two-stage (try, then buy) choice probabilities.

Indices are 0-based throughout.  A :class:`Ranking` stores ``sigma`` with
``sigma[i]`` the position of item ``i``; item ``i`` is therefore seen with
visibility ``v[sigma[i]]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidSignalError, PreconditionError, UnsupportedVariantError
from .signals import Affine, Power, SignalSpec, signal_values

__all__ = [
    "MarketSpec",
    "Ranking",
    "MarketState",
    "Power",
    "Affine",
    "SignalSpec",
    "quality_ranking",
    "effective_quality",
    "try_probabilities",
    "purchase_probabilities",
    "purchase_probabilities_from_counts",
]


def _frozen(values: Sequence[float] | np.ndarray, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MarketSpec:
    quality: np.ndarray
    appeal: np.ndarray
    visibility: np.ndarray

    def __post_init__(self) -> None:
        q = _frozen(self.quality)
        a = _frozen(self.appeal)
        v = _frozen(self.visibility)
        object.__setattr__(self, "quality", q)
        object.__setattr__(self, "appeal", a)
        object.__setattr__(self, "visibility", v)
        if q.ndim != 1 or q.size < 1:
            raise ValueError("quality must be a nonempty vector")
        if a.shape != q.shape or v.shape != q.shape:
            raise ValueError(
                f"quality, appeal and visibility lengths differ: "
                f"{q.size}, {a.size}, {v.size}"
            )
        if not np.all((q > 0) & (q <= 1)):
            raise ValueError("qualities must lie in (0, 1]")
        if not np.all(a > 0):
            raise ValueError("appeals must be positive")
        if not np.all(v > 0):
            raise ValueError("visibilities must be positive")

    @property
    def n(self) -> int:
        return int(self.quality.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MarketSpec):
            return NotImplemented
        return (
            np.array_equal(self.quality, other.quality)
            and np.array_equal(self.appeal, other.appeal)
            and np.array_equal(self.visibility, other.visibility)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class Ranking:
    sigma: np.ndarray

    def __post_init__(self) -> None:
        s = _frozen(self.sigma, dtype=np.int64)
        object.__setattr__(self, "sigma", s)
        if s.ndim != 1 or not np.array_equal(np.sort(s), np.arange(s.size)):
            raise ValueError(f"sigma {s.tolist()} is not a permutation of 0..n-1")

    @classmethod
    def identity(cls, n: int) -> Ranking:
        return cls(np.arange(n))

    @classmethod
    def from_order(cls, order: Sequence[int]) -> Ranking:
        """Build from ``order[j]`` = item displayed at position ``j``."""
        order = np.asarray(order, dtype=np.int64)
        sigma = np.empty_like(order)
        sigma[order] = np.arange(order.size)
        return cls(sigma)

    @property
    def order(self) -> np.ndarray:
        order = np.empty_like(self.sigma)
        order[self.sigma] = np.arange(self.sigma.size)
        return order

    @property
    def n(self) -> int:
        return int(self.sigma.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ranking):
            return NotImplemented
        return np.array_equal(self.sigma, other.sigma)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Ranking(sigma={self.sigma.tolist()})"


def positions_by_visibility(visibility: np.ndarray) -> np.ndarray:
    """Positions sorted by visibility descending, ties by position index."""
    return np.lexsort((np.arange(visibility.size), -np.asarray(visibility)))


def quality_ranking(spec: MarketSpec) -> Ranking:
    """Highest-quality item in the most visible position, and so on down."""
    items = np.lexsort((np.arange(spec.n), -spec.quality))
    positions = positions_by_visibility(spec.visibility)
    sigma = np.empty(spec.n, dtype=np.int64)
    sigma[items] = positions
    return Ranking(sigma)


def _ranking_or_identity(spec: MarketSpec, rank: Ranking | None) -> Ranking:
    if rank is None:
        return Ranking.identity(spec.n)
    if rank.n != spec.n:
        raise ValueError(f"ranking has {rank.n} items, market has {spec.n}")
    return rank


def effective_quality(spec: MarketSpec, rank: Ranking | None = None) -> np.ndarray:
    """Visibility-weighted quality ``v[sigma[i]] * q[i]``."""
    rank = _ranking_or_identity(spec, rank)
    return spec.visibility[rank.sigma] * spec.quality


def _normalise(weights: np.ndarray) -> np.ndarray:
    total = weights.sum()
    if not total > 0:
        raise InvalidSignalError("all choice weights are zero")
    return weights / total


def try_probabilities(
    spec: MarketSpec,
    rank: Ranking | None,
    sig: SignalSpec,
    shares: np.ndarray,
) -> np.ndarray:
    """Probability that the next arriving customer tries each item."""
    rank = _ranking_or_identity(spec, rank)
    vis = spec.visibility[rank.sigma]
    return _normalise(vis * signal_values(sig, spec.appeal, shares))


def purchase_probabilities(
    spec: MarketSpec,
    rank: Ranking | None,
    sig: SignalSpec,
    shares: np.ndarray,
) -> np.ndarray:
    """Probability that the next *purchase* is of each item.

    Customers who try and do not buy are replaced by fresh arrivals, so the
    try/buy loop collapses to weights ``v[sigma[i]] * q[i] * f(share_i)``.
    """
    rank = _ranking_or_identity(spec, rank)
    qbar = spec.visibility[rank.sigma] * spec.quality
    return _normalise(qbar * signal_values(sig, spec.appeal, shares))


def purchase_probabilities_from_counts(
    spec: MarketSpec,
    rank: Ranking | None,
    sig: SignalSpec,
    d: np.ndarray,
) -> np.ndarray:
    if not isinstance(sig, Power):
        raise UnsupportedVariantError(
            "purchase probabilities from raw counts need a power-law signal"
        )
    d = np.asarray(d, dtype=float)
    if np.any(d < 0) or not np.any(d > 0):
        raise PreconditionError("counts must be nonnegative with one positive entry")
    rank = _ranking_or_identity(spec, rank)
    qbar = spec.visibility[rank.sigma] * spec.quality
    # x**r is homogeneous, so normalising d first is unnecessary; dividing by
    # max(d) only keeps the powers in range for very large counts.
    return _normalise(qbar * np.power(d / d.max(), sig.r))


@dataclass(frozen=True, eq=False)
class MarketState:
    """Cumulative purchase counts plus period counters.

    Counts are real-valued so the appeal-seeded start ``d = a`` is
    representable.  ``shares`` is always derived from ``d``, never updated in place.
    """

    d: np.ndarray
    arrivals: int = 0
    purchases: int = 0
    _shares: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        d = _frozen(self.d)
        if d.ndim != 1 or np.any(d < 0) or not np.any(d > 0):
            raise PreconditionError("counts must be nonnegative with one positive entry")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "_shares", _frozen(d / d.sum()))

    @classmethod
    def seeded(cls, spec: MarketSpec) -> MarketState:
        return cls(spec.appeal.copy())

    @property
    def shares(self) -> np.ndarray:
        return self._shares

    def with_purchase(self, item: int) -> MarketState:
        d = self.d.copy()
        d[item] += 1.0
        return MarketState(d, self.arrivals, self.purchases + 1)

    def with_arrival(self) -> MarketState:
        return MarketState(self.d, self.arrivals + 1, self.purchases)
