"""One-versus-one and one-versus-all decompositions of the binary boosters."""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from . import boosting, roi
from .boosting import Ensemble
from .dataio import Dataset
from .errors import DataError, NumericalError, ShapeError
from .roi import RoiParams

MANIFEST_VERSION = 1


def _fit_binary(train: Dataset, params, positive_class=None, K0=None, round1=None) -> Ensemble:
    if isinstance(params, RoiParams):
        return roi.fit_roi(train, params, positive_class, K0=K0, round1=round1)
    return boosting.fit(train, params, positive_class, K0=K0, round1=round1)


def _predict_binary(ens: Ensemble, train: Dataset, test: Dataset):
    if ens.kind == "kproi":
        return roi.predict_roi(ens, train, test)
    return boosting.predict(ens, train, test)


@dataclass(frozen=True)
class OvoEnsemble:
    pairs: list  # (class_a, class_b, Ensemble) with class_a < class_b
    classes: int

    def to_record(self) -> dict:
        return {"version": MANIFEST_VERSION, "decomposition": "ovo", "classes": self.classes,
                "components": [{"classes": [a, b], "ensemble": e.to_record()} for a, b, e in self.pairs]}


@dataclass(frozen=True)
class OvaEnsemble:
    per_class: list  # per_class[c] separates class c (+1) from the rest
    classes: int

    def to_record(self) -> dict:
        return {"version": MANIFEST_VERSION, "decomposition": "ova", "classes": self.classes,
                "components": [{"classes": [c], "ensemble": e.to_record()} for c, e in enumerate(self.per_class)]}


def load_manifest(rec: dict):
    if rec.get("version") != MANIFEST_VERSION:
        raise ShapeError(f"unsupported manifest version {rec.get('version')}")
    comps = rec["components"]
    if rec["decomposition"] == "binary":
        return Ensemble.from_record(comps[0]["ensemble"])
    if rec["decomposition"] == "ovo":
        return OvoEnsemble([(c["classes"][0], c["classes"][1], Ensemble.from_record(c["ensemble"]))
                            for c in comps], rec["classes"])
    return OvaEnsemble([Ensemble.from_record(c["ensemble"]) for c in comps], rec["classes"])


def fit_ovo(train: Dataset, params) -> OvoEnsemble:
    C = train.n_classes
    if C < 2:
        raise DataError("need at least two classes")
    for c, cnt in enumerate(train.class_counts):
        if cnt < 2:
            raise DataError(f"class {train.class_names[c]!r} has fewer than two points")
    pairs = []
    for a, b in combinations(range(C), 2):
        sub = train.select([a, b])
        try:
            ens = _fit_binary(sub, params)
        except NumericalError as exc:
            raise type(exc)(f"pair ({train.class_names[a]}, {train.class_names[b]}): {exc}") from exc
        pairs.append((a, b, ens))
    return OvoEnsemble(pairs, C)


def predict_ovo(ens: OvoEnsemble, train: Dataset, test: Dataset) -> np.ndarray:
    """Plurality vote; ties go to the larger summed |margin| of won pairs, then the lower id."""
    C = ens.classes
    votes = np.zeros((C, test.n))
    strength = np.zeros((C, test.n))
    for a, b, e in ens.pairs:
        sub = train.select([a, b])
        pred = _predict_binary(e, sub, test)
        winner = np.where(pred.labels == 0, a, b)
        cols = np.arange(test.n)
        votes[winner, cols] += 1
        strength[winner, cols] += np.abs(pred.margin)
    if len(ens.pairs) == 1:
        a, b, _ = ens.pairs[0]
        return np.where(votes[a] > 0, a, b)
    out = np.empty(test.n, dtype=np.int64)
    for j in range(test.n):
        top = np.flatnonzero(votes[:, j] == votes[:, j].max())
        if top.size > 1:
            s = strength[top, j]
            top = top[s == s.max()]
        out[j] = top[0]
    return out


def fit_ova(train: Dataset, params) -> OvaEnsemble:
    C = train.n_classes
    if C < 2:
        raise DataError("need at least two classes")
    per_class = []
    for c in range(C):
        binary = Dataset(train.features, (train.labels == c).astype(np.int64),
                         ("rest", train.class_names[c]))
        try:
            per_class.append(_fit_binary(binary, params, positive_class=1))
        except NumericalError as exc:
            raise type(exc)(f"class {train.class_names[c]} vs rest: {exc}") from exc
    return OvaEnsemble(per_class, C)


def ova_scores(ens: OvaEnsemble, train: Dataset, test: Dataset) -> np.ndarray:
    """(C, m) alpha-normalised decision scores of the one-vs-rest ensembles."""
    scores = []
    for c, e in enumerate(ens.per_class):
        binary = Dataset(train.features, (train.labels == c).astype(np.int64),
                         ("rest", train.class_names[c]))
        scores.append(_predict_binary(e, binary, test).score)
    return np.vstack(scores)


def predict_ova(ens: OvaEnsemble, train: Dataset, test: Dataset) -> np.ndarray:
    return np.argmax(ova_scores(ens, train, test), axis=0)  # ties -> lowest class id


def resolve_decomposition(n_classes: int, decomposition: str) -> str:
    if decomposition == "auto":
        return "binary" if n_classes == 2 else "ovo"
    if decomposition not in ("binary", "ovo", "ova"):
        raise ValueError(f"unknown decomposition {decomposition!r}")
    return decomposition


def fit_auto(train: Dataset, params, decomposition: str = "auto", K0=None, round1=None):
    """Binary ensemble for two classes under ``auto``, otherwise the requested decomposition.

    ``K0`` and ``round1`` are only used by the binary path.
    """
    decomposition = resolve_decomposition(train.n_classes, decomposition)
    if decomposition == "binary":
        return _fit_binary(train, params, K0=K0, round1=round1)
    if decomposition == "ovo":
        return fit_ovo(train, params)
    return fit_ova(train, params)


def predict_any(model, train: Dataset, test: Dataset) -> np.ndarray:
    if isinstance(model, OvoEnsemble):
        return predict_ovo(model, train, test)
    if isinstance(model, OvaEnsemble):
        return predict_ova(model, train, test)
    return _predict_binary(model, train, test).labels


def to_manifest(model) -> dict:
    if isinstance(model, Ensemble):
        return {"version": MANIFEST_VERSION, "decomposition": "binary", "classes": 2,
                "components": [{"classes": [model.positive_class, model.negative_class],
                                "ensemble": model.to_record()}]}
    return model.to_record()


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(to_manifest(model)), encoding="utf-8")
