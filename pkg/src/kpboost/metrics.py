"""Class-balanced performance indices and the multi-criteria selection score."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import MetricUndefinedError, SelectionError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows indexed by the true class and columns by the predicted class."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or np.any(c < 0):
            raise ValueError("confusion counts must be a square non-negative matrix")
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_labels(cls, y_true, y_pred, n_classes: int | None = None) -> "ConfusionMatrix":
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        if n_classes is None:
            n_classes = int(max(y_true.max(), y_pred.max())) + 1
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (y_true, y_pred), 1)
        return cls(counts)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def recalls(self) -> np.ndarray:
        support = self.support
        if np.any(support == 0):
            missing = np.flatnonzero(support == 0).tolist()
            raise MetricUndefinedError(f"no true points for class(es) {missing}")
        return np.diag(self.counts) / support


def binary_confusion(tpr_count: int, pos: int, tnr_count: int, neg: int) -> ConfusionMatrix:
    """Two-class confusion from correct counts; class 0 is positive."""
    return ConfusionMatrix([[tpr_count, pos - tpr_count], [neg - tnr_count, tnr_count]])


def gmean(conf: ConfusionMatrix) -> float:
    r = conf.recalls()
    if np.any(r == 0):
        return 0.0
    return float(np.exp(np.mean(np.log(r))))


def _pair_auc(counts, a, b):
    # class a taken as positive, points of other classes ignored
    m_a, m_b = counts[a].sum(), counts[b].sum()
    tpr = counts[a, a] / m_a
    fpr = counts[b, a] / m_b
    return 0.5 * (1.0 + tpr - fpr)


def auc(conf: ConfusionMatrix) -> float:
    """(1 + tpr - fpr) / 2, averaged over ordered class pairs for more than two classes."""
    present = np.flatnonzero(conf.support > 0)
    if present.size < 2:
        raise MetricUndefinedError("AUC needs at least two classes with true points")
    if conf.n_classes == 2:
        return float(_pair_auc(conf.counts, 0, 1))
    vals = [0.5 * (_pair_auc(conf.counts, a, b) + _pair_auc(conf.counts, b, a))
            for a, b in combinations(present, 2)]
    return float(np.mean(vals))


def _class_disjunct_accuracy(partition, correct, indices):
    """Per class: list of (disjunct size, evaluated count, correct count)."""
    n = max([int(m.max()) for parts in partition.per_class for m in parts] + [int(indices.max())]) + 1
    cls, did, size = partition.assignment(n)
    if np.any(cls[indices] < 0):
        raise MetricUndefinedError("evaluated point outside every disjunct")
    out = []
    for c, parts in enumerate(partition.per_class):
        sel = cls[indices] == c
        ev = np.bincount(did[indices][sel], minlength=len(parts))
        ok = np.bincount(did[indices][sel], weights=correct[sel].astype(np.float64), minlength=len(parts))
        sizes = np.array([m.size for m in parts], dtype=np.float64)
        out.append((sizes, ev, ok))
    return out


def gsdi(partition, correct, indices=None) -> float:
    """Geometric mean over classes of disjunct accuracies weighted by exp(-|disjunct|).

    ``correct`` flags each evaluated point; ``indices`` gives their positions
    in the partitioned dataset (all points when omitted). Disjuncts with no
    evaluated point drop out of their class average. Weights are computed as
    exp(-(|D| - min|D|)), which leaves the ratio unchanged and avoids underflow.
    """
    correct = np.asarray(correct, dtype=bool)
    indices = np.arange(correct.size) if indices is None else np.asarray(indices, dtype=np.int64)
    if indices.shape != correct.shape:
        raise ValueError("one correctness flag per evaluated index is required")
    factors = []
    for c, (sizes, ev, ok) in enumerate(_class_disjunct_accuracy(partition, correct, indices)):
        seen = ev > 0
        if not np.any(seen):
            if sizes.size == 0:
                continue
            raise MetricUndefinedError(f"class {c}: no evaluated points in any disjunct")
        s = sizes[seen]
        w = np.exp(-(s - s.min()))
        acc = ok[seen] / ev[seen]
        factors.append(float(np.sum(w * acc) / np.sum(w)))
    if not factors:
        raise MetricUndefinedError("no class has evaluated points")
    if min(factors) == 0:
        return 0.0
    return float(math.exp(sum(math.log(f) for f in factors) / len(factors)))


@dataclass(frozen=True)
class ClassAccuracyTable:
    """Per-classifier (rows) per-class (columns) recall."""

    acc: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.acc, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("accuracy table must be two-dimensional")
        if np.any((a < 0) | (a > 1)):
            raise ValueError("accuracies must lie in [0, 1]")
        object.__setattr__(self, "acc", a)


def mu_scores(table) -> np.ndarray:
    """Sum over classes of min-max normalised accuracy; a class with no spread contributes 0."""
    acc = getattr(table, "acc", None)
    acc = np.asarray(table if acc is None else acc, dtype=np.float64)
    if acc.ndim != 2 or acc.shape[0] < 2:
        raise SelectionError("need at least two classifiers to compare")
    lo = acc.min(axis=0)
    span = acc.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    terms = np.where(span > 0, (acc - lo) / safe, 0.0)
    return terms.sum(axis=1)


def select_best(table) -> int:
    mu = mu_scores(table)
    return int(np.argmax(mu))  # first maximum wins ties


def report(y_true, y_pred, n_classes: int, partition=None, indices=None) -> dict:
    """Gmean, AUC, per-class recall and, given a disjunct partition, GSDI."""
    conf = ConfusionMatrix.from_labels(y_true, y_pred, n_classes)
    out = {"gmean": gmean(conf), "auc": auc(conf), "recalls": [float(r) for r in conf.recalls()]}
    if partition is not None:
        out["gsdi"] = gsdi(partition, np.asarray(y_true) == np.asarray(y_pred), indices)
    return out
