"""Dataset loading, synthetic blob generation, and snapshot export.

CSV input is a UTF-8 RFC-4180 subset; the header row is auto-detected by
default. Feature normalization happens after label extraction, per feature.
There is no dataset downloader: public benchmark files are prepared by hand
(see the README) and ingested as plain CSV, which keeps runs reproducible.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import EmptyFile, InvalidSpec, NonFiniteValue, ParseError
from .metrics import Dataset


@dataclass(frozen=True)
class CsvSpec:
    path: str
    label_col: Optional[Union[str, int]] = None
    normalize: str = "none"
    header: str = "auto"  # auto | yes | no


@dataclass(frozen=True)
class BlobSpec:
    n: int
    k: int
    d: int
    spread: float = 1.0
    seed: int = 0


def _is_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _normalize_features(pts: np.ndarray, mode: str) -> np.ndarray:
    if mode == "none":
        return pts
    if mode == "minmax":
        lo = pts.min(axis=0)
        span = pts.max(axis=0) - lo
        out = np.zeros_like(pts)
        nz = span != 0  # constant features map to zero, not NaN
        out[:, nz] = (pts[:, nz] - lo[nz]) / span[nz]
        return out
    if mode == "zscore":
        mean = pts.mean(axis=0)
        std = pts.std(axis=0)
        out = np.zeros_like(pts)
        nz = std != 0
        out[:, nz] = (pts[:, nz] - mean[nz]) / std[nz]
        return out
    raise ValueError(f"unknown normalization {mode!r}")


def load_csv(
    path,
    label_col: Optional[Union[str, int]] = None,
    normalize: str = "none",
    header: str = "auto",
) -> Dataset:
    """Read a dataset; row order becomes node id order.

    ``label_col`` may be a header name or a 0-based column index. Label
    values map to dense integers by first appearance. Raises ParseError,
    NonFiniteValue or EmptyFile on bad content.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    return parse_csv_rows(rows, label_col=label_col, normalize=normalize, header=header)


def parse_csv_rows(
    rows: list[list[str]],
    label_col: Optional[Union[str, int]] = None,
    normalize: str = "none",
    header: str = "auto",
) -> Dataset:
    if not rows:
        raise EmptyFile("no rows")
    if header == "yes":
        has_header = True
    elif header == "no":
        has_header = False
    else:
        # a header row contains at least one non-numeric cell
        has_header = not all(_is_float(c) for c in rows[0])
    names = [c.strip() for c in rows[0]] if has_header else None
    data = rows[1:] if has_header else rows
    if not data:
        raise EmptyFile("no data rows")

    width = len(data[0])
    label_idx: Optional[int] = None
    if label_col is not None:
        if isinstance(label_col, str) and not label_col.lstrip("-").isdigit():
            if names is None or label_col not in names:
                raise ParseError(0, -1, f"label column {label_col!r} not found in header")
            label_idx = names.index(label_col)
        else:
            label_idx = int(label_col)
            if not 0 <= label_idx < width:
                raise ParseError(0, label_idx, f"label column index {label_idx} out of range")

    feature_cols = [c for c in range(width) if c != label_idx]
    pts = np.empty((len(data), len(feature_cols)), dtype=np.float64)
    raw_labels: list[str] = []
    for r, row in enumerate(data):
        if len(row) != width:
            raise ParseError(r, len(row), f"row {r} has {len(row)} cells, expected {width}")
        for out_c, c in enumerate(feature_cols):
            cell = row[c].strip()
            try:
                val = float(cell)
            except ValueError:
                raise ParseError(r, c, f"unparseable value {cell!r} at row {r}, column {c}") from None
            if not math.isfinite(val):
                raise NonFiniteValue(f"non-finite value at row {r}, column {c}")
            pts[r, out_c] = val
        if label_idx is not None:
            raw_labels.append(row[label_idx].strip())

    labels = None
    if label_idx is not None:
        seen: dict[str, int] = {}
        labels = np.array([seen.setdefault(v, len(seen)) for v in raw_labels], dtype=np.int64)

    feature_names = None
    if names is not None:
        feature_names = [names[c] for c in feature_cols]
    pts = _normalize_features(pts, normalize)
    return Dataset(points=pts, labels=labels, feature_names=feature_names)


def write_csv(ds: Dataset, path) -> None:
    """Inverse of load_csv up to float-text round-tripping (repr is exact)."""
    names = ds.feature_names or [f"f{i}" for i in range(ds.d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if ds.labels is not None:
            w.writerow([*names, "label"])
            for row, lab in zip(ds.points, ds.labels):
                w.writerow([repr(float(v)) for v in row] + [int(lab)])
        else:
            w.writerow(names)
            for row in ds.points:
                w.writerow([repr(float(v)) for v in row])


def generate_blobs(
    n: int, k: int, d: int, spread: float = 1.0, seed: int = 0
) -> Dataset:
    """k isotropic gaussian clusters on a lattice, centers 10*spread apart.

    Sizes are floor(n/k)-balanced with the remainder spread over the first
    clusters; labels are always present. Deterministic per seed (PCG64).
    """
    if not (n >= k >= 1) or d < 1 or not (spread > 0):
        raise InvalidSpec(f"bad blob spec n={n} k={k} d={d} spread={spread}")
    side = max(1, math.ceil(k ** (1.0 / d)))
    rng = np.random.Generator(np.random.PCG64(seed))
    pts = np.empty((n, d), dtype=np.float64)
    labels = np.empty(n, dtype=np.int64)
    start = 0
    for c in range(k):
        size = n // k + (1 if c < n % k else 0)
        coords = []
        v = c
        for _ in range(d):
            coords.append(v % side)
            v //= side
        center = np.array(coords, dtype=np.float64) * (10.0 * spread)
        pts[start : start + size] = center + rng.normal(0.0, spread, size=(size, d))
        labels[start : start + size] = c
        start += size
    return Dataset(points=pts, labels=labels)


def load_dataset(spec: Union[CsvSpec, BlobSpec]) -> Dataset:
    if isinstance(spec, BlobSpec):
        return generate_blobs(spec.n, spec.k, spec.d, spec.spread, spec.seed)
    return load_csv(spec.path, spec.label_col, spec.normalize, spec.header)


def export_snapshot(session) -> dict:
    """Skeleton snapshot plus session metadata, as a JSON-ready document.

    Deliberately free of timestamps and oracle details: two runs that made
    the same moves serialize identically.
    """
    doc = session.skeleton.to_snapshot()
    doc["query_count"] = session.query_count
    doc["step_count"] = session.step_count
    doc["phase"] = session.phase.value
    doc["labels"] = [int(x) for x in session.component_labels()]
    doc["trace"] = [
        [q, a, c] for q, a, c in session.trace_rows
    ]
    return doc


def snapshot_json(session) -> str:
    return json.dumps(export_snapshot(session), indent=2, sort_keys=True) + "\n"
