"""Closed-form equilibria, trace-based stability classification and ranking search.

For a power-law signal with exponent ``r != 1`` every equilibrium is
determined by its support ``Q``: shares are proportional to
``qbar_i ** (1 / (1 - r))`` on ``Q`` and zero elsewhere, where
``qbar_i = v[sigma[i]] * q[i]``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import PreconditionError, SingularityError, SizeError, UnsupportedVariantError
from .model import (
    MarketSpec,
    Ranking,
    effective_quality,
    purchase_probabilities,
    quality_ranking,
    try_probabilities,
)
from .signals import Power, SignalSpec

__all__ = [
    "Classification",
    "Equilibrium",
    "equilibrium_for_support",
    "inner_equilibrium",
    "all_equilibria",
    "jacobian_diagonal",
    "trace_and_classify",
    "expected_purchases_at",
    "optimal_static_ranking",
    "swap_items",
    "support_from_string",
]

FIXED_POINT_TOL = 1e-10


class Classification(str, Enum):
    INNER_UNIQUE = "InnerUnique"
    UNSTABLE_BY_TRACE = "UnstableByTrace"
    MONOPOLY_VERTEX = "MonopolyVertex"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True, eq=False)
class Equilibrium:
    support: tuple[int, ...]
    shares: np.ndarray
    r: float
    trace: float
    classification: Classification | None = None

    def to_dict(self) -> dict:
        return {
            "support": list(self.support),
            "shares": self.shares.tolist(),
            "r": self.r,
            "trace": self.trace,
            "classification": None if self.classification is None else self.classification.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _weights_on_support(qbar: np.ndarray, r: float) -> np.ndarray:
    # qbar ** (1/(1-r)) normalised, computed in log space: the exponent
    # blows up as r -> 1.
    logs = np.log(qbar) / (1.0 - r)
    w = np.exp(logs - logs.max())
    return w / w.sum()


def equilibrium_for_support(
    spec: MarketSpec,
    rank: Ranking | None,
    r: float,
    support: Iterable[int],
) -> Equilibrium:
    if not r > 0:
        raise ValueError("signal exponent must be positive")
    if r == 1:
        raise UnsupportedVariantError(
            "r = 1 has no closed-form equilibrium family; simulate it instead"
        )
    Q = tuple(sorted(set(int(i) for i in support)))
    if not Q:
        raise ValueError("support must be nonempty")
    if Q[0] < 0 or Q[-1] >= spec.n:
        raise ValueError(f"support {Q} out of range for {spec.n} items")
    qbar = effective_quality(spec, rank)
    shares = np.zeros(spec.n)
    shares[list(Q)] = _weights_on_support(qbar[list(Q)], r)
    trace = 2.0 * r * (len(Q) - 1) - spec.n
    return trace_and_classify(Equilibrium(Q, shares, float(r), trace), spec.n)


def inner_equilibrium(spec: MarketSpec, rank: Ranking | None, r: float) -> Equilibrium:
    return equilibrium_for_support(spec, rank, r, range(spec.n))


def all_equilibria(spec: MarketSpec, rank: Ranking | None, r: float) -> list[Equilibrium]:
    """One equilibrium per nonempty support, in order of support size."""
    out = []
    for size in range(1, spec.n + 1):
        for Q in itertools.combinations(range(spec.n), size):
            out.append(equilibrium_for_support(spec, rank, r, Q))
    return out


def trace_and_classify(eq: Equilibrium, n: int) -> Equilibrium:
    """Fill in the trace ``2r(|Q|-1) - n`` and a stability verdict.

    A positive trace certifies an eigenvalue with positive real part.  For
    ``r < 1`` the full-support equilibrium is the global attractor and is
    reported as such even where the trace formula is positive.  No verdict
    is given for other equilibria with nonpositive trace.
    """
    size = len(eq.support)
    trace = 2.0 * eq.r * (size - 1) - n
    if size == 1:
        cls = Classification.MONOPOLY_VERTEX
    elif eq.r < 1 and size == n:
        cls = Classification.INNER_UNIQUE
    elif trace > 0:
        cls = Classification.UNSTABLE_BY_TRACE
    else:
        cls = Classification.INDETERMINATE
    return replace(eq, trace=trace, classification=cls)


def jacobian_diagonal(
    spec: MarketSpec,
    rank: Ranking | None,
    sig: SignalSpec,
    phi: np.ndarray,
) -> np.ndarray:
    """Diagonal of the Jacobian of ``p(phi) - phi`` at an equilibrium.

    Each entry is the derivative along the direction that raises ``phi_i``
    and lowers every other share one-for-one.  For ``i`` off the support the
    entry is ``-1``; on it, ``r * (1 + (|Q| - 2) * phi_i) - 1``.
    """
    if not isinstance(sig, Power):
        raise UnsupportedVariantError("the Jacobian is defined for power-law signals")
    r = sig.r
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (spec.n,) or np.any(phi < 0) or abs(phi.sum() - 1.0) > 1e-9:
        raise PreconditionError("phi must be a point of the simplex")
    if r < 1 and np.any(phi == 0):
        raise SingularityError(
            "f'(0) is unbounded for r < 1; boundary equilibria have no Jacobian"
        )
    residual = np.max(np.abs(purchase_probabilities(spec, rank, sig, phi) - phi))
    if residual > FIXED_POINT_TOL:
        raise PreconditionError(f"phi is not an equilibrium (residual {residual:.3g})")

    qbar = effective_quality(spec, rank)
    S = float(np.sum(qbar * phi**r))
    fprime = np.zeros(spec.n)
    pos = phi > 0
    fprime[pos] = r * phi[pos] ** (r - 1.0)
    if r == 1:
        fprime[~pos] = 1.0
    g = qbar * fprime
    others = g.sum() - g
    return ((1.0 - phi) * g + phi * others) / S - 1.0


def expected_purchases_at(
    spec: MarketSpec,
    rank: Ranking | None,
    sig: SignalSpec,
    shares: np.ndarray,
) -> float:
    """Expected purchases per arrival: sum of try-probability times quality."""
    return float(np.dot(try_probabilities(spec, rank, sig, shares), spec.quality))


def _inner_value_batch(
    spec: MarketSpec, r: float, sigmas: np.ndarray
) -> np.ndarray:
    """Expected purchases at the inner equilibrium for many rankings at once.

    ``f(phi*_i)`` is proportional to ``qbar_i ** (r / (1 - r))``.
    """
    vis = spec.visibility[sigmas]
    qbar = vis * spec.quality
    logs = np.log(qbar) * (r / (1.0 - r))
    w = vis * np.exp(logs - logs.max(axis=1, keepdims=True))
    return (w * spec.quality).sum(axis=1) / w.sum(axis=1)


def _value_of(spec: MarketSpec, r: float, rank: Ranking) -> float:
    eq = inner_equilibrium(spec, rank, r)
    return expected_purchases_at(spec, rank, Power(r), eq.shares)


def optimal_static_ranking(
    spec: MarketSpec,
    r: float,
    method: str = "exhaustive",
    start: Ranking | None = None,
) -> tuple[Ranking, float]:
    """Best static ranking for a sublinear signal, judged at equilibrium.

    ``method="exhaustive"`` scans all ``n!`` rankings (``n <= 10``) and keeps
    the first maximiser in lexicographic order of position assignments.
    ``method="local"`` hill-climbs over pairwise swaps from ``start``
    (default: the quality ranking), taking the best improving swap each
    round until none improves.
    """
    if not 0 < r < 1:
        raise ValueError("ranking search needs 0 < r < 1")
    n = spec.n
    if method == "exhaustive":
        if n > 10:
            raise SizeError(f"exhaustive search is limited to n <= 10, got {n}")
        best_val, best_sigma = -math.inf, None
        perms = itertools.permutations(range(n))
        while True:
            batch = np.array(list(itertools.islice(perms, 50_000)), dtype=np.int64)
            if batch.size == 0:
                break
            vals = _inner_value_batch(spec, r, batch)
            k = int(np.argmax(vals))
            if vals[k] > best_val:
                best_val, best_sigma = float(vals[k]), batch[k]
        rank = Ranking(best_sigma)
        return rank, _value_of(spec, r, rank)
    if method == "local":
        rank = quality_ranking(spec) if start is None else start
        sigma = rank.sigma.copy()
        value = float(_inner_value_batch(spec, r, sigma[None, :])[0])
        pairs = list(itertools.combinations(range(n), 2))
        while pairs:
            cands = np.repeat(sigma[None, :], len(pairs), axis=0)
            for row, (i, j) in enumerate(pairs):
                cands[row, i], cands[row, j] = sigma[j], sigma[i]
            vals = _inner_value_batch(spec, r, cands)
            k = int(np.argmax(vals))
            if vals[k] <= value + 1e-15:
                break
            sigma, value = cands[k], float(vals[k])
        rank = Ranking(sigma)
        return rank, _value_of(spec, r, rank)
    raise ValueError(f"unknown method {method!r}; use 'exhaustive' or 'local'")


def swap_items(rank: Ranking, i: int, j: int) -> Ranking:
    """Exchange the positions of items ``i`` and ``j``."""
    sigma = rank.sigma.copy()
    sigma[i], sigma[j] = sigma[j], sigma[i]
    return Ranking(sigma)


def support_from_string(text: str, n: int) -> Sequence[int]:
    """Parse a 1-based comma list such as ``"1,3"`` into 0-based indices."""
    items = [int(tok) - 1 for tok in text.split(",") if tok.strip()]
    if not items or min(items) < 0 or max(items) >= n:
        raise ValueError(f"support {text!r} must list item numbers in 1..{n}")
    return items
