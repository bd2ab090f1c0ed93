"""Dataset container, CSV ingestion, z-score normalization and fold planning."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with dense integer labels ``0..C-1``.

    ``class_names`` records the original label strings in encoding order.
    Arrays are made read-only on construction.
    """

    features: np.ndarray
    labels: np.ndarray
    class_names: tuple = ()

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, copy=True)
        y = np.array(self.labels, dtype=np.int64, copy=True)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DataError(f"shape mismatch: features {X.shape}, labels {y.shape}")
        if X.shape[0] == 0:
            raise DataError("empty dataset")
        if not np.all(np.isfinite(X)):
            raise DataError("non-finite feature values")
        if y.min() < 0:
            raise DataError("labels must be non-negative class ids")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        n_classes = int(y.max()) + 1
        names = tuple(self.class_names) or tuple(str(c) for c in range(n_classes))
        if len(names) < n_classes:
            raise DataError("fewer class names than classes")
        object.__setattr__(self, "class_names", names)
        if np.any(self.class_counts == 0):
            raise DataError("every class id below C must occur at least once")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=len(self.class_names))

    def subset(self, idx) -> "Dataset":
        """Rows ``idx`` with the class inventory kept intact.

        Raises DataError if a class ends up empty; use :meth:`select` for
        slices that may drop classes.
        """
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.class_names)

    def select(self, classes) -> "Dataset":
        """Rows belonging to ``classes``, relabelled 0..len(classes)-1 in the given order."""
        classes = list(classes)
        mask = np.isin(self.labels, classes)
        remap = {c: i for i, c in enumerate(classes)}
        y = np.array([remap[c] for c in self.labels[mask]], dtype=np.int64)
        names = tuple(self.class_names[c] for c in classes)
        return Dataset(self.features[mask], y, names)

    def with_features(self, X) -> "Dataset":
        return Dataset(X, self.labels, self.class_names)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, label_column: int = -1) -> Dataset:
    """Read a comma-separated file with one label column.

    A first row containing any non-numeric feature cell is treated as a
    header. Labels are encoded densely in order of first appearance.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [(lineno, row) for lineno, row in enumerate(csv.reader(fh), start=1)
                    if row and any(cell.strip() for cell in row)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no data rows")

    width = len(rows[0][1])
    if not -width <= label_column < width:
        raise DataError(f"{path}: label column {label_column} out of range for {width} columns")
    col = label_column % width

    first = [c.strip() for i, c in enumerate(rows[0][1]) if i != col]
    if not all(_is_number(c) for c in first):
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: header only")

    feats, raw_labels = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
        try:
            feats.append([float(c) for i, c in enumerate(row) if i != col])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        raw_labels.append(row[col].strip())

    names: dict[str, int] = {}
    for lab in raw_labels:
        names.setdefault(lab, len(names))
    if len(names) < 2:
        raise DataError(f"{path}: degenerate dataset, only one class present")
    y = np.array([names[lab] for lab in raw_labels], dtype=np.int64)
    return Dataset(np.array(feats, dtype=np.float64), y, tuple(names))


def save_csv(ds: Dataset, path, header: bool = True) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"x{j}" for j in range(ds.d)] + ["label"])
        for row, lab in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [ds.class_names[lab]])


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X) -> "Scaler":
        X = np.asarray(X, dtype=np.float64)
        return cls(X.mean(axis=0), X.std(axis=0))  # population std

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        safe = np.where(self.std > 0, self.std, 1.0)
        Z = (X - self.mean) / safe
        Z[:, self.std == 0] = 0.0
        return Z


def normalize(train: Dataset, apply_to: Dataset) -> tuple[Dataset, Dataset]:
    """Z-score both sets with statistics estimated on ``train``; constant features map to 0."""
    sc = Scaler.fit(train.features)
    return train.with_features(sc.transform(train.features)), apply_to.with_features(
        sc.transform(apply_to.features))


def normalize_whole(ds: Dataset) -> Dataset:
    return normalize(ds, ds)[0]


@dataclass(frozen=True)
class FoldPlan:
    folds: list = field(default_factory=list)
    seed: int = 0

    @property
    def folds_count(self) -> int:
        return len(self.folds)

    def to_text(self) -> str:
        lines = [f"# foldplan seed={self.seed} folds={self.folds_count}"]
        for i, (tr, te) in enumerate(self.folds):
            lines.append(f"fold {i} train " + " ".join(map(str, tr)))
            lines.append(f"fold {i} test " + " ".join(map(str, te)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FoldPlan":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = dict(tok.split("=") for tok in lines[0].lstrip("# ").split()[1:])
        parts: dict[int, dict[str, np.ndarray]] = {}
        for ln in lines[1:]:
            toks = ln.split()
            parts.setdefault(int(toks[1]), {})[toks[2]] = np.array(toks[3:], dtype=np.int64)
        folds = [(parts[i]["train"], parts[i]["test"]) for i in sorted(parts)]
        return cls(folds, int(header["seed"]))


def stratified_kfold(ds: Dataset, k: int = 10, seed: int = 0) -> FoldPlan:
    """Stratified k-fold split; every class is dealt over the folds in near-equal chunks."""
    if k < 2:
        raise DataError("k must be at least 2")
    counts = ds.class_counts
    for c, cnt in enumerate(counts):
        if cnt < k:
            raise DataError(f"class {ds.class_names[c]!r} has {cnt} points, fewer than k={k}; "
                            "subsample_preserving_imbalance is the fallback")
    rng = np.random.default_rng(seed)
    test_sets: list[list[np.ndarray]] = [[] for _ in range(k)]
    offset = 0
    for c in range(ds.n_classes):
        idx = rng.permutation(np.flatnonzero(ds.labels == c))
        for j, chunk in enumerate(np.array_split(idx, k)):
            # rotate so the larger chunks of successive classes land on different folds
            test_sets[(j + offset) % k].append(chunk)
        offset += len(idx) % k
    all_idx = np.arange(ds.n)
    folds = []
    for parts in test_sets:
        te = np.sort(np.concatenate(parts))
        tr = np.setdiff1d(all_idx, te)
        folds.append((tr, te))
    return FoldPlan(folds, seed)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def subsample_preserving_imbalance(ds: Dataset, fraction: float, seed: int = 0) -> Dataset:
    """Draw round(fraction * count) points per class without replacement."""
    if not 0 < fraction <= 1:
        raise DataError(f"fraction must lie in (0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    keep = []
    for c, cnt in enumerate(ds.class_counts):
        m = _round_half_up(fraction * cnt)
        if m < 1:
            raise DataError(f"class {ds.class_names[c]!r} would be empty after subsampling")
        keep.append(rng.choice(np.flatnonzero(ds.labels == c), size=m, replace=False))
    idx = rng.permutation(np.concatenate(keep))
    return ds.subset(idx)


def imbalance_ratio(ds: Dataset) -> float:
    counts = ds.class_counts
    return float(counts.max() / counts.min())


def two_gaussians(n: int = 300, ratio: float = 9.0, separation: float = 1.5, d: int = 2,
                  seed: int = 0) -> Dataset:
    """Overlapping Gaussian blobs, majority labelled 0 and minority labelled 1."""
    rng = np.random.default_rng(seed)
    n_min = _round_half_up(n / (ratio + 1))
    n_maj = n - n_min
    shift = np.zeros(d)
    shift[0] = separation
    X = np.vstack([rng.normal(size=(n_maj, d)), rng.normal(size=(n_min, d)) + shift])
    y = np.r_[np.zeros(n_maj, dtype=np.int64), np.ones(n_min, dtype=np.int64)]
    return Dataset(X, y, ("majority", "minority"))
