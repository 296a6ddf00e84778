"""Labeled multi-class datasets: CSV ingestion, standardization, splits, synthetic sets."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with contiguous integer labels ``1..C``.

    ``label_map[k]`` is the original label value of class ``k + 1``.
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    label_map: tuple = ()
    feature_names: tuple = ()

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        t = np.asarray(self.labels, dtype=int)
        if x.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if t.shape != (x.shape[0],):
            raise DataError("labels must have one entry per feature row")
        if not np.all(np.isfinite(x)):
            raise DataError("features contain non-finite values")
        if self.class_count < 2:
            raise DataError("at least 2 classes are required")
        if t.min() < 1 or t.max() > self.class_count:
            raise DataError("labels must lie in 1..C")
        if len(np.unique(t)) != self.class_count:
            raise DataError("every class in 1..C must appear at least once")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", t)
        if not self.label_map:
            object.__setattr__(self, "label_map", tuple(range(1, self.class_count + 1)))
        if len(self.label_map) != self.class_count:
            raise DataError("label_map must have one entry per class")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def original_labels(self) -> np.ndarray:
        return np.asarray(self.label_map)[self.labels - 1]

    def subset(self, index) -> "Dataset":
        """Rows selected by ``index``; class numbering is kept as-is."""
        return Dataset(self.features[index], self.labels[index], self.class_count,
                       self.label_map, self.feature_names)


@dataclass(frozen=True)
class StandardizationParams:
    mean: np.ndarray
    scale: np.ndarray

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.mean.shape[0]:
            raise DataError(
                f"dimension mismatch: expected {self.mean.shape[0]} features, got "
                f"{x.shape[-1] if x.ndim else 0}")
        return (x - self.mean) / self.scale

    def inverse_transform(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) * self.scale + self.mean

    @classmethod
    def identity(cls, dim: int) -> "StandardizationParams":
        return cls(np.zeros(dim), np.ones(dim))


@dataclass(frozen=True)
class SplitSpec:
    train_count: int
    seed: int = 0


def _parse_float(cell: str):
    try:
        return float(cell)
    except ValueError:
        return None


def _is_data(row) -> bool:
    # blank lines and '#' comment lines (provenance headers) are skipped
    return bool(row) and any(c.strip() for c in row) and not row[0].lstrip().startswith("#")


def load_csv(path, label_column: int = -1) -> Dataset:
    """Read a comma-separated file; the header row is optional.

    A first row containing any non-numeric cell is taken as the header.
    Labels are remapped to ``1..C`` in sorted order of the original values.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if _is_data(r)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file")

    header = ()
    if any(_parse_float(c) is None for c in rows[0]):
        header = tuple(c.strip() for c in rows[0])
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")

    width = len(rows[0])
    if width < 2:
        raise DataError(f"{path}: need at least one feature column and a label column")
    col = label_column if label_column >= 0 else width + label_column
    if not 0 <= col < width:
        raise DataError(f"label column {label_column} out of range for {width} columns")

    feats, raw_labels = [], []
    for lineno, row in enumerate(rows, start=2 if header else 1):
        if len(row) != width:
            raise DataError(f"{path}:{lineno}: ragged row ({len(row)} cells, expected {width})")
        vals = []
        for j, cell in enumerate(row):
            if j == col:
                continue
            v = _parse_float(cell)
            if v is None:
                raise DataError(f"{path}:{lineno}: non-numeric cell {cell!r} in column {j}")
            vals.append(v)
        lab = _parse_float(row[col])
        if lab is None or lab != int(lab):
            raise DataError(f"{path}:{lineno}: label {row[col]!r} is not an integer")
        feats.append(vals)
        raw_labels.append(int(lab))

    originals = sorted(set(raw_labels))
    if len(originals) < 2:
        raise DataError(f"{path}: fewer than 2 classes")
    lookup = {v: k + 1 for k, v in enumerate(originals)}
    names = tuple(h for j, h in enumerate(header) if j != col)
    return Dataset(np.array(feats, dtype=float), np.array([lookup[v] for v in raw_labels]),
                   len(originals), tuple(originals), names)


def load_features(path, label_column: int | None = None) -> np.ndarray:
    """Read an unlabeled feature matrix; ``label_column``, if given, is dropped."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if _is_data(r)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if rows and any(_parse_float(c) is None for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0])
    drop = None
    if label_column is not None:
        drop = label_column if label_column >= 0 else width + label_column
        if not 0 <= drop < width:
            raise DataError(f"label column {label_column} out of range for {width} columns")
    out = []
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise DataError(f"{path}: ragged row {lineno} ({len(row)} cells, expected {width})")
        vals = [_parse_float(c) for j, c in enumerate(row) if j != drop]
        if any(v is None for v in vals):
            raise DataError(f"{path}: non-numeric cell in data row {lineno}")
        out.append(vals)
    return np.array(out, dtype=float)


def write_csv(data: Dataset, path) -> None:
    """Write ``data`` with the original labels in the last column."""
    names = data.feature_names or tuple(f"x{j + 1}" for j in range(data.n_features))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "label"])
        for x, t in zip(data.features, data.original_labels()):
            w.writerow([*(repr(float(v)) for v in x), int(t)])


def fit_standardizer(train: Dataset) -> StandardizationParams:
    if train.n_samples < 2:
        raise DataError("standardization needs at least 2 samples")
    mean = train.features.mean(axis=0)
    scale = train.features.std(axis=0)
    scale = np.where(scale < 1e-12, 1.0, scale)
    return StandardizationParams(mean, scale)


def apply_standardizer(params: StandardizationParams, data: Dataset) -> Dataset:
    return Dataset(params.transform(data.features), data.labels, data.class_count,
                   data.label_map, data.feature_names)


def split(data: Dataset, spec: SplitSpec, max_redraws: int = 100) -> tuple[Dataset, Dataset]:
    """Random train/test partition in which both halves contain every class."""
    n = data.n_samples
    if not 0 < spec.train_count < n:
        raise DataError(f"train_count must lie in (0, {n}), got {spec.train_count}")
    rng = np.random.default_rng(spec.seed)
    for _ in range(max_redraws):
        perm = rng.permutation(n)
        tr, te = np.sort(perm[:spec.train_count]), np.sort(perm[spec.train_count:])
        if (len(np.unique(data.labels[tr])) == data.class_count
                and len(np.unique(data.labels[te])) == data.class_count):
            return data.subset(tr), data.subset(te)
    raise DataError(f"no split with full class coverage after {max_redraws} draws")


def _gaussian(rng, mean, cov, n):
    return rng.multivariate_normal(mean, cov, size=n)


def gen_overlap(seed: int = 0) -> Dataset:
    """3 heavily overlapping 2-D classes built from six Gaussian clusters.

    Class 1 is one skewed ellipse in the lower right; class 2 is three clusters
    in a horizontal row; class 3 is two clusters sitting in the gaps of class 2.
    """
    rng = np.random.default_rng(seed)
    iso = 0.8 * np.eye(2)
    parts = [
        (_gaussian(rng, [3.0, -3.0], [[1.6, 0.9], [0.9, 0.8]], 100), 1),
        (_gaussian(rng, [-4.0, 1.0], iso, 34), 2),
        (_gaussian(rng, [0.0, 1.0], iso, 33), 2),
        (_gaussian(rng, [4.0, 1.0], iso, 33), 2),
        (_gaussian(rng, [-2.0, 1.0], iso, 50), 3),
        (_gaussian(rng, [2.0, 1.0], iso, 50), 3),
    ]
    x = np.vstack([p for p, _ in parts])
    t = np.concatenate([np.full(len(p), c) for p, c in parts])
    return Dataset(x, t, 3)


OVERCLASS_SIZES = (28, 22, 18, 14, 12, 9, 8, 7, 6, 3)


def gen_overclass(seed: int = 0) -> Dataset:
    """127 points in 10 unit-covariance clusters on a ring of radius 5."""
    rng = np.random.default_rng(seed)
    xs, ts = [], []
    for k, size in enumerate(OVERCLASS_SIZES):
        angle = 2.0 * np.pi * k / len(OVERCLASS_SIZES)
        centre = 5.0 * np.array([np.cos(angle), np.sin(angle)])
        xs.append(centre + rng.standard_normal((size, 2)))
        ts.append(np.full(size, k + 1))
    return Dataset(np.vstack(xs), np.concatenate(ts), len(OVERCLASS_SIZES))


def filter_first_k_classes(data: Dataset, k: int) -> Dataset:
    if not 2 <= k <= data.class_count:
        raise DataError(f"k must lie in 2..{data.class_count}, got {k}")
    if k == data.class_count:
        return data
    keep = data.labels <= k
    return Dataset(data.features[keep], data.labels[keep], k, data.label_map[:k],
                   data.feature_names)
