"""Region-of-influence variant of kernel-perturbation boosting.

Correctly classified points lying within a class-specific radius of a
misclassified point keep their resolution for the next round. At test time a
point borrows the perturbation parameters of its nearest training point.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from . import kernels
from .boosting import (BoostParams, Ensemble, Prediction, _combine, boost, minority_class, raw_round_scores,
                       signed_labels)
from .dataio import Dataset
from .errors import ParameterError

THETA_GRID = (0.6, 0.7, 0.8)


@dataclass(frozen=True)
class RoiParams:
    base: BoostParams = BoostParams()
    theta: float = 0.6

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ParameterError(f"ROI scaling must lie in (0, 1], got {self.theta}")


@dataclass(frozen=True)
class RoiRadii:
    roi_pos: float
    roi_neg: float


def _mean_nn_distance(X: np.ndarray) -> float:
    Dm = cdist(X, X)
    np.fill_diagonal(Dm, np.inf)
    return float(Dm.min(axis=1).mean())


def class_roi(train: Dataset, class_sign: int, theta: float, positive_class: Optional[int] = None) -> float:
    """theta times the mean same-class nearest-neighbour distance.

    ``class_sign`` is +1 for the positive class (the minority unless
    ``positive_class`` is given) and -1 for the other one.
    """
    if positive_class is None:
        positive_class = minority_class(train)
    y = signed_labels(train, positive_class)
    X = train.features[y == class_sign]
    if X.shape[0] < 2:
        warnings.warn(f"class {class_sign:+d} has fewer than two points; ROI set to 0", stacklevel=2)
        return 0.0
    return theta * _mean_nn_distance(X)


def adjust_retention(omega, mis_pos, mis_neg, train: Dataset, radii: RoiRadii) -> np.ndarray:
    """Drop from ``omega`` every point within a closed ROI ball of a misclassified point.

    ``omega`` is a boolean mask or an index array; the result has the same form.
    """
    omega_arr = np.asarray(omega)
    as_mask = omega_arr.dtype == bool
    mask = omega_arr.copy() if as_mask else np.isin(np.arange(train.n), omega_arr)
    X = train.features
    for idx, radius in ((np.asarray(mis_pos, dtype=np.int64), radii.roi_pos),
                        (np.asarray(mis_neg, dtype=np.int64), radii.roi_neg)):
        if idx.size == 0:
            continue
        near = (cdist(X[idx], X) <= radius).any(axis=0)
        mask &= ~near
    return mask if as_mask else np.flatnonzero(mask)


def fit_roi(train: Dataset, params: RoiParams, positive_class: Optional[int] = None,
            K0: Optional[kernels.KernelMatrix] = None, round1=None) -> Ensemble:
    if positive_class is None:
        positive_class = minority_class(train)
    radii = RoiRadii(class_roi(train, +1, params.theta, positive_class),
                     class_roi(train, -1, params.theta, positive_class))

    def retention(correct, mis_pos, mis_neg):
        return adjust_retention(correct, mis_pos, mis_neg, train, radii)

    ens = boost(train, params.base, positive_class, K0, retention, kind="kproi", round1=round1)
    return replace(ens, theta=params.theta, radii=(radii.roi_pos, radii.roi_neg))


def nearest_training_point(train_X, test_X) -> np.ndarray:
    """Index of the nearest training row for each test row; ties go to the lowest index."""
    return np.argmin(cdist(test_X, train_X), axis=1)


def round_outputs_roi(ens: Ensemble, train: Dataset, test: Dataset) -> list:
    G = raw_round_scores(ens, train, test)
    nearest = nearest_training_point(train.features, test.features)
    f_prev = np.zeros(test.n)
    D_test_cum = np.ones(test.n)
    out = []
    for t, (r, k) in enumerate(zip(ens.rounds, ens.perturbation_history)):
        # test factors scale whole columns of the cross kernel
        D_test_cum = D_test_cum * kernels.transformation_factors(k[nearest], f_prev)
        f_prev = D_test_cum * G[t] + r.model.bias
        out.append(f_prev)
    return out


def predict_roi(ens: Ensemble, train: Dataset, test: Dataset) -> Prediction:
    return _combine(ens, round_outputs_roi(ens, train, test))
