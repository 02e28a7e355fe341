"""Synthetic strategic datasets, CSV ingestion and label balancing."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataLoadError, InvalidArgumentError
from .wdrsc import StrategicDataset, mask_from_indices

__all__ = [
    "SyntheticSpec",
    "generate_synthetic",
    "CsvSchema",
    "load_csv",
    "write_csv",
    "balance",
    "train_test_split",
]


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    d: int
    noise_std: float = 0.1
    strategic: int | None = None  # defaults to ceil(d / 2)
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise InvalidArgumentError("synthetic data needs n >= 1 and d >= 1")
        if self.noise_std < 0:
            raise InvalidArgumentError("noise_std must be >= 0")
        if self.strategic is None:
            object.__setattr__(self, "strategic", (self.d + 1) // 2)
        if not 0 <= self.strategic <= self.d:
            raise InvalidArgumentError("strategic count must lie in [0, d]")


def generate_synthetic(spec: SyntheticSpec, return_noise: bool = False):
    """Gaussian features, labels from a Gaussian ground-truth classifier plus scalar noise.

    Returns ``(dataset, theta_star)`` or ``(dataset, theta_star, noise)``.
    The first ``spec.strategic`` coordinates are strategic; sign(0) is +1.
    """
    rng = np.random.default_rng(spec.seed)
    theta_star = rng.standard_normal(spec.d)
    X = rng.standard_normal((spec.n, spec.d))
    noise = spec.noise_std * rng.standard_normal(spec.n)
    y = np.where(X @ theta_star + noise >= 0.0, 1.0, -1.0)
    ds = StrategicDataset(X, y, mask_from_indices(spec.d, range(spec.strategic)))
    if return_noise:
        return ds, theta_star, noise
    return ds, theta_star


@dataclass(frozen=True)
class CsvSchema:
    label_column: str = "label"
    label_map: dict = field(default_factory=lambda: {"1": 1, "+1": 1, "-1": -1, "0": -1})
    feature_columns: tuple[str, ...] | None = None
    standardize: bool = False


def _map_label(raw: str, schema: CsvSchema, row: int) -> float:
    key = raw.strip()
    if key in schema.label_map:
        value = schema.label_map[key]
    else:
        try:
            num = float(key)
        except ValueError:
            raise DataLoadError(f"row {row}: label {raw!r} is not in the label map") from None
        candidates = [v for k, v in schema.label_map.items() if _as_float(k) == num]
        if not candidates:
            raise DataLoadError(f"row {row}: label {raw!r} is not binary under the label map")
        value = candidates[0]
    if value not in (1, -1):
        raise DataLoadError(f"row {row}: label map must produce -1/+1, got {value!r}")
    return float(value)


def _as_float(text):
    try:
        return float(text)
    except ValueError:
        return math.nan


def load_csv(path, schema: CsvSchema | None = None, strategic=None) -> StrategicDataset:
    """Read a header-first CSV into a dataset.

    Rows with unparseable cells are rejected with their 1-based data row
    number and column name.  ``strategic`` lists strategic feature indices
    (default: all).
    """
    schema = schema or CsvSchema()
    if not os.path.exists(path):
        raise DataLoadError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataLoadError(f"{path}: empty file") from None
        if len(set(header)) != len(header) or any(not h for h in header):
            raise DataLoadError(f"{path}: malformed header {header}")
        if schema.label_column not in header:
            raise DataLoadError(f"{path}: label column {schema.label_column!r} missing from header")
        label_at = header.index(schema.label_column)
        if schema.feature_columns is None:
            feature_cols = [j for j, h in enumerate(header) if j != label_at]
        else:
            missing = [c for c in schema.feature_columns if c not in header]
            if missing:
                raise DataLoadError(f"{path}: feature columns {missing} missing from header")
            feature_cols = [header.index(c) for c in schema.feature_columns]
        if not feature_cols:
            raise DataLoadError(f"{path}: no feature columns")
        rows, labels = [], []
        for r, record in enumerate(reader, start=1):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise DataLoadError(f"{path}: row {r} has {len(record)} cells, header has {len(header)}")
            values = []
            for j in feature_cols:
                try:
                    value = float(record[j])
                except ValueError:
                    raise DataLoadError(f"{path}: row {r}, column {header[j]!r}: {record[j]!r} is not a number") from None
                if not math.isfinite(value):
                    raise DataLoadError(f"{path}: row {r}, column {header[j]!r}: non-finite value")
                values.append(value)
            rows.append(values)
            labels.append(_map_label(record[label_at], schema, r))
    if not rows:
        raise DataLoadError(f"{path}: no data rows")
    X = np.array(rows)
    if schema.standardize:
        std = X.std(axis=0)
        X = (X - X.mean(axis=0)) / np.where(std > 0, std, 1.0)
    d = X.shape[1]
    mask = None if strategic is None else mask_from_indices(d, strategic)
    return StrategicDataset(X, np.array(labels), mask, tuple(header[j] for j in feature_cols))


def write_csv(dataset: StrategicDataset, path, label_column: str = "label") -> None:
    names = dataset.feature_names or tuple(f"x{j}" for j in range(dataset.d))
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*names, label_column])
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow([f"{v:.17g}" for v in x] + [str(int(y))])
    os.replace(tmp, path)


def _generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def balance(dataset: StrategicDataset, target_n: int, rng) -> StrategicDataset:
    """Subsample ceil(target/2) positives and floor(target/2) negatives without replacement.

    Selected rows keep their original order.
    """
    gen = _generator(rng)
    need_pos = (target_n + 1) // 2
    need_neg = target_n // 2
    pos = np.flatnonzero(dataset.labels > 0)
    neg = np.flatnonzero(dataset.labels < 0)
    if pos.size < need_pos:
        raise InvalidArgumentError(f"class +1 has {pos.size} examples, need {need_pos}")
    if neg.size < need_neg:
        raise InvalidArgumentError(f"class -1 has {neg.size} examples, need {need_neg}")
    chosen = np.concatenate([gen.choice(pos, need_pos, replace=False), gen.choice(neg, need_neg, replace=False)])
    return dataset.subset(np.sort(chosen))


def train_test_split(dataset: StrategicDataset, test_fraction: float, rng):
    if not 0 < test_fraction < 1:
        raise InvalidArgumentError("test_fraction must lie in (0, 1)")
    order = _generator(rng).permutation(dataset.n)
    n_test = max(1, int(round(test_fraction * dataset.n)))
    return dataset.subset(np.sort(order[n_test:])), dataset.subset(np.sort(order[:n_test]))
