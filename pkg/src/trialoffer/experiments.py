"""Config-driven experiments that write their results as CSV/JSON data files.

A config is a YAML mapping.  Example::

    kind: convergence
    market: five_song
    r_grid: [0.1, 0.25, 0.5, 0.75]
    iterations: 100000
    seed: 1
    output_dir: out/convergence

Every CSV starts with a ``# config_hash=... seed=...`` comment line and
every JSON file carries the same information under ``"meta"``.  The hash
covers all fields that influence results, so ``output_dir`` and
``workers`` are excluded.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .dataset import MARKET_NAMES, Setting, load_dataset, market_by_name
from .equilibrium import (
    all_equilibria,
    equilibrium_for_support,
    expected_purchases_at,
    inner_equilibrium,
    optimal_static_ranking,
)
from .errors import ConfigError
from .metrics import efficiency_curve, mann_whitney_u, unpredictability
from .model import MarketSpec, quality_ranking
from .signals import Affine, Power
from .sim import (
    InitMode,
    Popularity,
    RunConfig,
    StaticQuality,
    TimeConvention,
    run_ensemble,
    run_world,
)

__all__ = [
    "KINDS",
    "ExperimentConfig",
    "parse_config",
    "validate_config",
    "run_experiment",
]

KINDS = (
    "convergence",
    "share_bars",
    "predictability",
    "unpredictability_table",
    "efficiency",
    "equilibrium_report",
    "ranking_search",
)
POLICIES = ("quality", "popularity")
METHODS = ("exhaustive", "local")
# Beyond this size the equilibrium report lists the inner and vertex equilibria only.
FULL_REPORT_MAX_N = 10


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    market: str
    r_grid: tuple[float, ...]
    setting: str = "independent"
    policy: str = "quality"
    policies: tuple[str, ...] = ("quality", "popularity")
    rerank_every: int = 1
    worlds: int = 1
    iterations: int = 100_000
    time_convention: str = "arrival"
    init: str = "appeal"
    sample_stride: int = 1000
    seed: int = 0
    method: str = "exhaustive"
    output_dir: str = "output"
    workers: int | None = None

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["r_grid"] = list(self.r_grid)
        d["policies"] = list(self.policies)
        return d

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def resolve_market(self) -> MarketSpec:
        if Path(self.market).is_dir():
            return load_dataset(self.market, Setting(self.setting), expected_items=None).spec
        return market_by_name(self.market)


_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v: Any) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def parse_config(raw: Any) -> ExperimentConfig:
    """Validate a mapping and build the config, collecting every error."""
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a mapping of field names to values"])
    errors: list[str] = []
    for key in raw:
        if key not in _FIELD_NAMES:
            errors.append(f"{key}: unknown field")

    def need(name: str) -> Any:
        if name not in raw:
            errors.append(f"{name}: required field missing")
            return None
        return raw[name]

    kind = need("kind")
    if kind is not None and kind not in KINDS:
        errors.append(f"kind: must be one of {', '.join(KINDS)}")

    market = need("market")
    if market is not None:
        if not isinstance(market, str):
            errors.append("market: must be a string")
        elif market not in MARKET_NAMES and not Path(market).is_dir():
            errors.append(f"market: {market!r} is neither a known market nor a dataset directory")

    r_grid = need("r_grid")
    if r_grid is not None:
        if _is_real(r_grid):
            r_grid = [r_grid]
        if not isinstance(r_grid, list) or not r_grid:
            errors.append("r_grid: must be a nonempty list of numbers")
        else:
            for r in r_grid:
                if not _is_real(r):
                    errors.append(f"r_grid: {r!r} is not a number")
                elif r <= 0:
                    errors.append("r_grid: signal exponent must be positive")

    def choice(name: str, allowed: tuple[str, ...]) -> None:
        if name in raw and raw[name] not in allowed:
            errors.append(f"{name}: must be one of {', '.join(allowed)}")

    choice("setting", tuple(s.value for s in Setting))
    choice("policy", POLICIES)
    choice("time_convention", tuple(t.value for t in TimeConvention))
    choice("init", tuple(m.value for m in InitMode))
    choice("method", METHODS)
    if "policies" in raw:
        pols = raw["policies"]
        if not isinstance(pols, list) or not pols or any(p not in POLICIES for p in pols):
            errors.append(f"policies: must be a nonempty list drawn from {', '.join(POLICIES)}")

    def positive_int(name: str, minimum: int) -> None:
        if name in raw:
            v = raw[name]
            if not _is_int(v) or v < minimum:
                errors.append(f"{name}: must be an integer >= {minimum}")

    positive_int("worlds", 1)
    positive_int("iterations", 1)
    positive_int("rerank_every", 1)
    positive_int("sample_stride", 1)
    if "seed" in raw and (not _is_int(raw["seed"]) or not 0 <= raw["seed"] < 2**64):
        errors.append("seed: must be an integer in [0, 2**64)")
    if "workers" in raw and raw["workers"] is not None:
        if not _is_int(raw["workers"]) or raw["workers"] < 1:
            errors.append("workers: must be a positive integer or null")
    if "output_dir" in raw and not isinstance(raw["output_dir"], str):
        errors.append("output_dir: must be a string")

    if (
        raw.get("kind") == "efficiency"
        and raw.get("time_convention", "arrival") != "arrival"
    ):
        errors.append("time_convention: efficiency curves need the arrival convention")
    worlds = raw.get("worlds", 1)
    if raw.get("kind") == "unpredictability_table" and _is_int(worlds) and worlds < 2:
        errors.append("worlds: unpredictability needs at least 2 worlds")

    if errors:
        raise ConfigError(errors)
    values = {k: v for k, v in raw.items() if k in _FIELD_NAMES}
    values["r_grid"] = tuple(float(r) for r in r_grid)
    if "policies" in values:
        values["policies"] = tuple(values["policies"])
    return ExperimentConfig(**values)


def validate_config(path: str | Path, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"invalid YAML: {exc}"]) from exc
    if isinstance(raw, dict) and overrides:
        raw = {**raw, **{k: v for k, v in overrides.items() if v is not None}}
    return parse_config(raw)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


# -- output helpers -----------------------------------------------------------


class _Writer:
    def __init__(self, cfg: ExperimentConfig) -> None:
        self.cfg = cfg
        self.dir = Path(cfg.output_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.header = f"# config_hash={cfg.config_hash()} seed={cfg.seed}\n"
        self.paths: list[Path] = []

    def csv(self, name: str, body: str) -> None:
        path = self.dir / name
        path.write_text(self.header + body)
        self.paths.append(path)

    def rows(self, name: str, header: list[str], rows: list[list[Any]]) -> None:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(repr(x) if isinstance(x, float) else str(x) for x in row))
        self.csv(name, "\n".join(lines) + "\n")

    def json(self, name: str, payload: dict) -> None:
        path = self.dir / name
        doc = {"meta": {"config_hash": self.cfg.config_hash(), "seed": self.cfg.seed}, **payload}
        path.write_text(json.dumps(doc, indent=2) + "\n")
        self.paths.append(path)


def _rtag(r: float) -> str:
    return f"{r:g}"


def _run_config(cfg: ExperimentConfig, r: float, policy: str | None = None) -> RunConfig:
    policy = policy or cfg.policy
    pol = Popularity(cfg.rerank_every) if policy == "popularity" else StaticQuality()
    return RunConfig(
        signal=Power(r),
        iterations=cfg.iterations,
        time_convention=TimeConvention(cfg.time_convention),
        init=InitMode(cfg.init),
        policy=pol,
        sample_stride=cfg.sample_stride,
        seed=cfg.seed,
    )


def _equilibrium_entry(spec: MarketSpec, r: float) -> dict:
    rank = quality_ranking(spec)
    if r == 1:
        return {"r": r, "closed_form": False, "note": "r = 1 converges to a monopoly"}
    eq = inner_equilibrium(spec, rank, r)
    return {"r": r, "closed_form": True, **eq.to_dict()}


# -- experiment kinds ---------------------------------------------------------


def _convergence(cfg: ExperimentConfig, spec: MarketSpec, out: _Writer) -> None:
    entries = []
    for r in cfg.r_grid:
        rec = run_world(spec, _run_config(cfg, r))
        out.csv(f"trajectory_r{_rtag(r)}.csv", rec.to_csv())
        entries.append(_equilibrium_entry(spec, r))
    out.json("equilibria.json", {"equilibria": entries})


def _share_bars(cfg: ExperimentConfig, spec: MarketSpec, out: _Writer) -> None:
    rows = []
    for r in cfg.r_grid:
        recs = run_ensemble(spec, _run_config(cfg, r), cfg.worlds, cfg.workers)
        sim = np.mean([rec.final_shares for rec in recs], axis=0)
        eq = _equilibrium_entry(spec, r)
        eq_shares = eq.get("shares", [math.nan] * spec.n)
        for i in range(spec.n):
            rows.append([r, i + 1, float(spec.quality[i]), float(eq_shares[i]), float(sim[i])])
    out.rows("share_bars.csv", ["r", "item", "quality", "equilibrium_share", "simulated_share"], rows)


def _predictability(cfg: ExperimentConfig, spec: MarketSpec, out: _Writer) -> None:
    rows = []
    summary = []
    for r in cfg.r_grid:
        recs = run_ensemble(spec, _run_config(cfg, r), cfg.worlds, cfg.workers)
        for rec in recs:
            for i in range(spec.n):
                rows.append([r, rec.world, i + 1, float(spec.quality[i]), int(rec.downloads[i])])
        entry: dict[str, Any] = {"r": r}
        if len(recs) >= 2:
            stats = unpredictability(np.array([rec.final_shares for rec in recs]))
            entry["U"] = stats.overall
            entry["per_item"] = stats.per_item.tolist()
        summary.append(entry)
    out.rows("predictability.csv", ["r", "world", "item", "quality", "downloads"], rows)
    out.json("predictability.json", {"unpredictability": summary})


def _unpredictability_table(cfg: ExperimentConfig, spec: MarketSpec, out: _Writer) -> None:
    per_world: dict[float, np.ndarray] = {}
    bars = []
    world_rows = []
    for r in cfg.r_grid:
        recs = run_ensemble(spec, _run_config(cfg, r), cfg.worlds, cfg.workers)
        stats = unpredictability(np.array([rec.final_shares for rec in recs]))
        per_world[r] = stats.per_world
        bars.append([r, stats.overall, float(np.std(stats.per_world, ddof=1))])
        world_rows += [[r, w, float(u)] for w, u in enumerate(stats.per_world)]
    out.rows("unpredictability.csv", ["r", "U", "per_world_std"], bars)
    out.rows("per_world_unpredictability.csv", ["r", "world", "U_world"], world_rows)
    tests = []
    for ra, rb in itertools.combinations(cfg.r_grid, 2):
        res = mann_whitney_u(per_world[ra], per_world[rb], "a_less")
        tests.append([ra, rb, res.statistic, res.pvalue])
    out.rows("pvalues.csv", ["r_first", "r_second", "U_statistic", "p_value"], tests)


def _efficiency(cfg: ExperimentConfig, spec: MarketSpec, out: _Writer) -> None:
    finals = []
    for r in cfg.r_grid:
        for policy in cfg.policies:
            recs = run_ensemble(spec, _run_config(cfg, r, policy), cfg.worlds, cfg.workers)
            curve = efficiency_curve(recs)
            out.csv(f"efficiency_r{_rtag(r)}_{policy}.csv", curve.to_csv())
            finals.append({"r": r, "policy": policy, "mean_downloads": float(curve.mean_downloads[-1])})
    out.json("efficiency.json", {"horizon": cfg.iterations, "final": finals})


def _equilibrium_report(cfg: ExperimentConfig, spec: MarketSpec, out: _Writer) -> None:
    rank = quality_ranking(spec)
    no_signal_value = expected_purchases_at(spec, rank, Affine(alpha=1.0, beta=0.0), spec.appeal / spec.appeal.sum())
    reports = []
    for r in cfg.r_grid:
        entry: dict[str, Any] = {"r": r, "expected_purchases_no_signal": no_signal_value}
        if r == 1:
            entry["closed_form"] = False
            entry["note"] = "r = 1 converges to a monopoly"
            reports.append(entry)
            continue
        inner = inner_equilibrium(spec, rank, r)
        entry["inner"] = inner.to_dict()
        entry["expected_purchases_with_signal"] = expected_purchases_at(spec, rank, Power(r), inner.shares)
        if spec.n <= FULL_REPORT_MAX_N:
            eqs = all_equilibria(spec, rank, r)
        else:
            eqs = [equilibrium_for_support(spec, rank, r, [k]) for k in range(spec.n)] + [inner]
        entry["equilibria"] = [eq.to_dict() for eq in eqs]
        reports.append(entry)
    out.json("equilibrium_report.json", {"n": spec.n, "reports": reports})


def _ranking_search(cfg: ExperimentConfig, spec: MarketSpec, out: _Writer) -> None:
    results = []
    qrank = quality_ranking(spec)
    for r in cfg.r_grid:
        if not 0 < r < 1:
            results.append({"r": r, "skipped": "ranking search needs 0 < r < 1"})
            continue
        eq = inner_equilibrium(spec, qrank, r)
        rank, value = optimal_static_ranking(spec, r, cfg.method)
        results.append(
            {
                "r": r,
                "method": cfg.method,
                "quality_ranking": qrank.sigma.tolist(),
                "quality_ranking_value": expected_purchases_at(spec, qrank, Power(r), eq.shares),
                "best_ranking": rank.sigma.tolist(),
                "best_value": value,
            }
        )
    out.json("ranking_search.json", {"results": results})


_DISPATCH = {
    "convergence": _convergence,
    "share_bars": _share_bars,
    "predictability": _predictability,
    "unpredictability_table": _unpredictability_table,
    "efficiency": _efficiency,
    "equilibrium_report": _equilibrium_report,
    "ranking_search": _ranking_search,
}


def run_experiment(cfg: ExperimentConfig) -> list[Path]:
    spec = cfg.resolve_market()
    out = _Writer(cfg)
    _DISPATCH[cfg.kind](cfg, spec, out)
    return out.paths
