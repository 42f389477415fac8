"""The 50-song MusicLab-style market and the small worked-example markets.

The bundled data lives in ``trialoffer/data`` as two CSV files:

* ``products.csv`` -- ``index,quality,appeal`` (independent setting)
* ``visibility.csv`` -- ``position,visibility``

Visibilities for positions 26-50 come from a printed table whose right
column is labelled 25..48, 50.  Its 25 values are read as positions 26..50
in printed order; :data:`VISIBILITY_NOTE` records this in every bundle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .model import MarketSpec

__all__ = [
    "Setting",
    "DatasetBundle",
    "load_dataset",
    "save_dataset",
    "builtin_examples",
    "market_by_name",
    "MARKET_NAMES",
]

PRODUCTS_FILE = "products.csv"
VISIBILITY_FILE = "visibility.csv"

VISIBILITY_NOTE = (
    "visibility positions 26-50: source table labels its second column "
    "25..48,50 (position 25 twice, 49 missing); values taken as positions "
    "26..50 in printed order"
)


class Setting(str, Enum):
    INDEPENDENT = "independent"
    ANTI_CORRELATED = "anticorrelated"


@dataclass(frozen=True)
class DatasetBundle:
    spec: MarketSpec
    setting: Setting
    provenance: str


def _read_rows(path: Path, header: list[str]) -> list[tuple[int, list[str]]]:
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise SchemaError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise SchemaError(f"{path.name} is empty", row=1) from None
        if [c.strip() for c in first] != header:
            raise SchemaError(f"{path.name}: expected header {','.join(header)}", row=1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SchemaError(
                    f"{path.name}: expected {len(header)} fields, got {len(row)}", row=lineno
                )
            rows.append((lineno, [c.strip() for c in row]))
    return rows


def _parse_number(text: str, path: Path, lineno: int, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise SchemaError(f"{path.name}: {what} {text!r} is not a number", row=lineno) from None
    if not np.isfinite(value):
        raise SchemaError(f"{path.name}: {what} must be finite", row=lineno)
    return value


def _parse_indexed(path: Path, header: list[str]) -> list[tuple[int, list[float]]]:
    out = []
    for k, (lineno, row) in enumerate(_read_rows(path, header), start=1):
        try:
            idx = int(row[0])
        except ValueError:
            raise SchemaError(f"{path.name}: {header[0]} {row[0]!r} is not an integer", row=lineno) from None
        if idx != k:
            raise SchemaError(f"{path.name}: expected {header[0]} {k}, got {idx}", row=lineno)
        vals = [_parse_number(c, path, lineno, name) for c, name in zip(row[1:], header[1:])]
        out.append((lineno, vals))
    return out


def _data_dir() -> Path:
    return Path(str(resources.files("trialoffer") / "data"))


def load_dataset(
    path: str | Path | None = None,
    setting: Setting | str = Setting.INDEPENDENT,
    expected_items: int | None = 50,
) -> DatasetBundle:
    """Load ``products.csv`` and ``visibility.csv`` from directory ``path``.

    ``path=None`` loads the bundled 50-song data.  In the anti-correlated
    setting every appeal is replaced by ``1 - quality``.
    """
    setting = Setting(setting)
    directory = _data_dir() if path is None else Path(path)
    prod_path = directory / PRODUCTS_FILE
    vis_path = directory / VISIBILITY_FILE

    products = _parse_indexed(prod_path, ["index", "quality", "appeal"])
    visibility = _parse_indexed(vis_path, ["position", "visibility"])
    if expected_items is not None and len(products) != expected_items:
        raise SchemaError(f"{PRODUCTS_FILE}: expected {expected_items} products, got {len(products)}")
    if len(visibility) != len(products):
        raise SchemaError(
            f"{VISIBILITY_FILE}: {len(visibility)} positions for {len(products)} products"
        )
    if not products:
        raise SchemaError(f"{PRODUCTS_FILE}: no products")

    quality, appeal = [], []
    for lineno, (q, a) in products:
        if not 0 < q <= 1:
            raise SchemaError(f"{PRODUCTS_FILE}: quality {q} outside (0, 1]", row=lineno)
        if setting is Setting.ANTI_CORRELATED:
            a = 1.0 - q
        if not a > 0:
            raise SchemaError(f"{PRODUCTS_FILE}: appeal {a} must be positive", row=lineno)
        quality.append(q)
        appeal.append(a)
    vis = []
    for lineno, (v,) in visibility:
        if not v > 0:
            raise SchemaError(f"{VISIBILITY_FILE}: visibility {v} must be positive", row=lineno)
        vis.append(v)

    provenance = f"{directory} ({setting.value})"
    if path is None:
        provenance += "; " + VISIBILITY_NOTE
    return DatasetBundle(MarketSpec(quality, appeal, vis), setting, provenance)


def save_dataset(bundle: DatasetBundle, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    spec = bundle.spec
    with (directory / PRODUCTS_FILE).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "quality", "appeal"])
        for i, (q, a) in enumerate(zip(spec.quality.tolist(), spec.appeal.tolist()), start=1):
            writer.writerow([i, repr(q), repr(a)])
    with (directory / VISIBILITY_FILE).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["position", "visibility"])
        for j, v in enumerate(spec.visibility.tolist(), start=1):
            writer.writerow([j, repr(v)])


def builtin_examples() -> dict[str, MarketSpec]:
    """Small markets used in the worked examples and convergence runs.

    ``example_7_2`` comes without appeals; they are set to 1, which leaves
    its equilibria unchanged.
    """
    return {
        "five_song": MarketSpec(
            quality=[0.80, 0.72, 0.68, 0.65, 0.60],
            appeal=[0.38, 0.35, 0.46, 0.27, 0.62],
            visibility=[0.80, 0.75, 0.69, 0.62, 0.58],
        ),
        "six_song": MarketSpec(
            quality=[0.80, 0.72, 0.65, 0.57, 0.52, 0.49],
            appeal=[0.38, 0.36, 0.27, 0.60, 0.77, 0.78],
            visibility=[0.80, 0.75, 0.62, 0.48, 0.40, 0.35],
        ),
        "example_7_1": MarketSpec(
            quality=[1.0, 0.4],
            appeal=[1.0, 0.3],
            visibility=[1.0, 1.0],
        ),
        "example_7_2": MarketSpec(
            quality=[1.0, 0.261, 0.002],
            appeal=[1.0, 1.0, 1.0],
            visibility=[1.0, 0.720, 0.229],
        ),
    }


MARKET_NAMES = (
    "five_song",
    "six_song",
    "example_7_1",
    "example_7_2",
    "musiclab_independent",
    "musiclab_anticorrelated",
)


def market_by_name(name: str) -> MarketSpec:
    """Resolve a built-in name, ``musiclab_<setting>``, or a dataset directory."""
    examples = builtin_examples()
    if name in examples:
        return examples[name]
    if name == "musiclab_independent":
        return load_dataset(None, Setting.INDEPENDENT).spec
    if name == "musiclab_anticorrelated":
        return load_dataset(None, Setting.ANTI_CORRELATED).spec
    path = Path(name)
    if path.is_dir():
        return load_dataset(path, Setting.INDEPENDENT, expected_items=None).spec
    raise KeyError(f"unknown market {name!r}; choose one of {', '.join(MARKET_NAMES)} or a directory")
