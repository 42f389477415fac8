"""Discrete stochastic simulation of a trial-offer market.

Two clocks are supported.  Under :attr:`TimeConvention.PURCHASE` every
period ends with a purchase drawn from the purchase probabilities; under
:attr:`TimeConvention.ARRIVAL` every period is one customer who tries an
item and buys it with probability equal to its quality.

Randomness: world ``w`` of a run seeded with ``seed`` draws from a Philox
stream keyed by ``SeedSequence(seed, spawn_key=(w,))``.  Results therefore
depend only on ``(seed, w)`` and never on how worlds are scheduled across
threads.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np

from . import _kernel
from .model import (
    MarketSpec,
    MarketState,
    Ranking,
    positions_by_visibility,
    quality_ranking,
    try_probabilities,
)
from .signals import Affine, Power, SignalSpec

__all__ = [
    "TimeConvention",
    "InitMode",
    "StaticQuality",
    "StaticGiven",
    "Popularity",
    "RunConfig",
    "RunRecord",
    "world_rng",
    "sample_index",
    "step_purchase",
    "step_arrival",
    "popularity_ranking",
    "run_world",
    "run_ensemble",
]

_CHUNK = 1 << 16


class TimeConvention(str, Enum):
    PURCHASE = "purchase"
    ARRIVAL = "arrival"


class InitMode(str, Enum):
    APPEAL_SEEDED = "appeal"
    MU_PROCESS = "mu"


@dataclass(frozen=True)
class StaticQuality:
    pass


@dataclass(frozen=True)
class StaticGiven:
    ranking: Ranking


@dataclass(frozen=True)
class Popularity:
    rerank_every: int = 1

    def __post_init__(self) -> None:
        if self.rerank_every < 1:
            raise ValueError("rerank_every must be at least 1")


RankingPolicy = Union[StaticQuality, StaticGiven, Popularity]


@dataclass(frozen=True)
class RunConfig:
    signal: SignalSpec
    iterations: int
    time_convention: TimeConvention = TimeConvention.ARRIVAL
    init: InitMode = InitMode.APPEAL_SEEDED
    policy: RankingPolicy = field(default_factory=StaticQuality)
    sample_stride: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        # iterations == 0 is allowed: the record then just echoes the start
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "time_convention", TimeConvention(self.time_convention))
        object.__setattr__(self, "init", InitMode(self.init))

    def to_dict(self) -> dict:
        sig = self.signal
        if isinstance(sig, Power):
            signal = {"kind": "power", "r": sig.r}
        else:
            signal = {"kind": "affine", "alpha": sig.alpha, "beta": sig.beta}
        if isinstance(self.policy, Popularity):
            policy = {"kind": "popularity", "rerank_every": self.policy.rerank_every}
        elif isinstance(self.policy, StaticGiven):
            policy = {"kind": "given", "sigma": self.policy.ranking.sigma.tolist()}
        else:
            policy = {"kind": "quality"}
        return {
            "signal": signal,
            "iterations": self.iterations,
            "time_convention": self.time_convention.value,
            "init": self.init.value,
            "policy": policy,
            "sample_stride": self.sample_stride,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Outcome of one simulated world.

    ``final_counts`` is the count vector ``d`` in the convention of the
    chosen initialisation (it includes the appeals when seeded with them);
    ``downloads`` counts real purchases only.  ``shares[k]`` are the market
    shares at period ``times[k]`` and ``downloads_series[k]`` the total
    purchases up to then.
    """

    times: np.ndarray
    shares: np.ndarray
    downloads_series: np.ndarray
    final_counts: np.ndarray
    downloads: np.ndarray
    arrivals: int
    purchases: int
    seed: int
    world: int
    config: RunConfig

    def __post_init__(self) -> None:
        for name in ("times", "shares", "downloads_series", "final_counts", "downloads"):
            getattr(self, name).setflags(write=False)

    @property
    def final_shares(self) -> np.ndarray:
        return self.shares[-1]

    def write_csv(self, fh: io.TextIOBase) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["period", "item", "share"])
        for t, row in zip(self.times.tolist(), self.shares.tolist()):
            for i, s in enumerate(row):
                writer.writerow([t, i, repr(s)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "world": self.world,
            "arrivals": self.arrivals,
            "purchases": self.purchases,
            "final_shares": self.final_shares.tolist(),
            "downloads": self.downloads.tolist(),
            "config": self.config.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


def world_rng(seed: int, world: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(world,))
    return np.random.Generator(np.random.Philox(ss))


def sample_index(p: np.ndarray, u: float) -> int:
    """Inverse-CDF draw: first index whose cumulative weight exceeds ``u``."""
    cum = np.cumsum(p)
    idx = int(np.searchsorted(cum, u * cum[-1], side="right"))
    return min(idx, len(cum) - 1)


def step_purchase(
    state: MarketState, p: np.ndarray, rng: np.random.Generator
) -> tuple[MarketState, int]:
    item = sample_index(p, rng.random())
    return state.with_purchase(item), item


def step_arrival(
    spec: MarketSpec,
    rank: Ranking | None,
    sig: SignalSpec,
    state: MarketState,
    rng: np.random.Generator,
) -> tuple[MarketState, int, bool]:
    probs = try_probabilities(spec, rank, sig, state.shares)
    item = sample_index(probs, rng.random())
    bought = bool(rng.random() < spec.quality[item])
    state = state.with_arrival()
    if bought:
        state = state.with_purchase(item)
    return state, item, bought


def popularity_ranking(spec: MarketSpec, counts: np.ndarray) -> Ranking:
    """Most purchased item in the most visible position; ties by item index."""
    items = np.lexsort((np.arange(spec.n), -np.asarray(counts, dtype=float)))
    sigma = np.empty(spec.n, dtype=np.int64)
    sigma[items] = positions_by_visibility(spec.visibility)
    return Ranking(sigma)


def _initial_ranking(spec: MarketSpec, policy: RankingPolicy, counts: np.ndarray) -> Ranking:
    if isinstance(policy, StaticQuality):
        return quality_ranking(spec)
    if isinstance(policy, StaticGiven):
        if policy.ranking.n != spec.n:
            raise ValueError("given ranking does not match the market size")
        return policy.ranking
    return popularity_ranking(spec, counts)


def run_world(spec: MarketSpec, config: RunConfig, world: int = 0) -> RunRecord:
    L = config.iterations
    stride = config.sample_stride
    arrival = config.time_convention is TimeConvention.ARRIVAL
    sig = config.signal

    # Both initialisations drive the dynamics with appeal + purchases; they
    # differ only in what is reported as d.
    counts = np.array(spec.appeal, dtype=float)
    downloads = np.zeros(spec.n)
    sigma = _initial_ranking(spec, config.policy, counts).sigma.copy()
    pos_order = positions_by_visibility(spec.visibility).astype(np.int64)

    n_samples = L // stride + 1 + (1 if L % stride else 0)
    times = np.zeros(n_samples, dtype=np.int64)
    shares = np.zeros((n_samples, spec.n))
    dl_series = np.zeros(n_samples, dtype=np.int64)
    counters = np.zeros(3, dtype=np.int64)
    _kernel._record(counts, 0, 0, counters, times, shares, dl_series)

    if isinstance(sig, Power):
        kind, r, alpha, beta = _kernel.SIGNAL_POWER, sig.r, 0.0, 0.0
    elif isinstance(sig, Affine):
        kind, r, alpha, beta = _kernel.SIGNAL_AFFINE, 1.0, sig.alpha, sig.beta
    else:
        raise TypeError(f"unsupported signal {sig!r}")
    popularity = isinstance(config.policy, Popularity)
    rerank_every = config.policy.rerank_every if popularity else 1

    rng = world_rng(config.seed, world)
    per_period = 2 if arrival else 1
    done = 0
    while done < L:
        block = min(_CHUNK, L - done)
        uniforms = rng.random(block * per_period)
        _kernel.advance(
            counts, downloads, sigma, spec.visibility, spec.quality, spec.appeal,
            pos_order, kind, r, alpha, beta, arrival, popularity, rerank_every,
            uniforms, block, L, stride, counters, times, shares, dl_series,
        )
        done += block

    purchases = int(counters[1])
    if config.init is InitMode.MU_PROCESS:
        final_counts = downloads.copy()
    else:
        final_counts = counts.copy()
    return RunRecord(
        times=times,
        shares=shares,
        downloads_series=dl_series,
        final_counts=final_counts,
        downloads=downloads,
        arrivals=L if arrival else 0,
        purchases=purchases,
        seed=config.seed,
        world=world,
        config=config,
    )


def run_ensemble(
    spec: MarketSpec,
    config: RunConfig,
    worlds: int,
    workers: int | None = None,
) -> list[RunRecord]:
    """Simulate ``worlds`` independent worlds, optionally on a thread pool.

    The compiled kernel releases the GIL, so threads give real parallelism.
    Output order and content do not depend on ``workers``.
    """
    if worlds < 1:
        raise ValueError("worlds must be at least 1")
    if workers is None:
        workers = min(worlds, os.cpu_count() or 1)
    if workers <= 1:
        return [run_world(spec, config, w) for w in range(worlds)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda w: run_world(spec, config, w), range(worlds)))


def write_records(records: list[RunRecord], directory: Path, stem: str) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for rec in records:
        base = directory / f"{stem}_world{rec.world:03d}"
        csv_path = base.with_suffix(".csv")
        csv_path.write_text(rec.to_csv())
        json_path = base.with_suffix(".json")
        json_path.write_text(rec.to_json())
        paths += [csv_path, json_path]
    return paths
