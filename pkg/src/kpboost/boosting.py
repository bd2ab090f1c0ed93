"""Kernel-perturbation boosting of SVMs for two-class problems.

Every round rescales the kernel around each training point by
``exp(-k_i f_{t-1}(x_i)**2)``; ``k_i`` grows by ``step`` whenever the point
was classified correctly, so resolution is retained only around the points
the previous round got wrong. Rounds are weighted by their distance from the
ideal (tpr, tnr) = (1, 1) and filtered against the unperturbed first round.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import kernels
from .dataio import Dataset
from .errors import ConvergenceError, DataError, NumericalError, ParameterError, ShapeError
from .svm import DEFAULT_TOL, TrainedSVM, decision_values, sign, solve_dual

SQRT2 = math.sqrt(2.0)
EPS_MIN = 1e-12
BUNDLE_VERSION = 1

# perturbation step grid: 1e-4..9e-4, 1e-3..9e-3, 1e-2..9e-2, 0.1..1 (37 values)
STEP_GRID = tuple(
    [round(m * 10.0**e, 6) for e in (-4, -3, -2) for m in range(1, 10)]
    + [round(0.1 * m, 1) for m in range(1, 11)]
)


@dataclass(frozen=True)
class BoostParams:
    rounds: int = 10
    step: float = 0.01
    sigma: float = 1.0
    C: float = 100.0
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if int(self.rounds) != self.rounds or self.rounds < 1:
            raise ParameterError(f"rounds must be a positive integer, got {self.rounds}")
        if not self.step > 0:
            raise ParameterError(f"perturbation step must be positive, got {self.step}")
        if not self.sigma > 0 or not self.C > 0:
            raise ParameterError("sigma and C must be positive")


@dataclass(frozen=True)
class RoundRecord:
    model: TrainedSVM
    alpha: float
    epsilon: float
    tpr: float
    tnr: float
    D_train: np.ndarray
    retained: bool = False


@dataclass(frozen=True)
class Prediction:
    labels: np.ndarray
    margin: np.ndarray  # sum over retained rounds of w_t * h_t(x)
    score: np.ndarray  # sum of w_t * f_t(x) divided by sum of w_t


@dataclass(frozen=True)
class Ensemble:
    rounds: list
    perturbation_history: list
    sigma: float
    C: float
    step: float
    positive_class: int
    negative_class: int
    selection: str = "strict"
    kind: str = "kpboost"
    theta: Optional[float] = None
    radii: Optional[tuple] = None

    @property
    def retained(self) -> list:
        return [t for t, r in enumerate(self.rounds) if r.retained]

    @property
    def weights(self) -> np.ndarray:
        """Voting weight per round: alpha on retained rounds, 0 elsewhere.

        When no retained round has positive alpha (only possible through the
        single-round fallback or epsilon exactly 1/sqrt(2)), retained rounds
        vote with weight 1 so the ensemble still follows them.
        """
        w = np.array([r.alpha if r.retained else 0.0 for r in self.rounds])
        keep = np.array([r.retained for r in self.rounds])
        if not np.any(w[keep] > 0):
            w = keep.astype(np.float64)
        return w

    def diagnostics(self) -> list[dict]:
        w = self.weights
        return [
            {
                "round": t + 1,
                "epsilon": r.epsilon,
                "alpha": r.alpha,
                "weight": float(w[t]),
                "tpr": r.tpr,
                "tnr": r.tnr,
                "retained": r.retained,
                "n_sv": int(r.model.sv_indices.size),
                "solver_iterations": r.model.n_iter,
            }
            for t, r in enumerate(self.rounds)
        ]

    def to_record(self) -> dict:
        return {
            "version": BUNDLE_VERSION,
            "kind": self.kind,
            "sigma": self.sigma,
            "C": self.C,
            "step": self.step,
            "positive_class": self.positive_class,
            "negative_class": self.negative_class,
            "selection": self.selection,
            "theta": self.theta,
            "radii": list(self.radii) if self.radii is not None else None,
            "k_history": [[float(v) for v in k] for k in self.perturbation_history],
            "rounds": [
                {
                    "svm": r.model.to_record(),
                    "alpha": r.alpha,
                    "epsilon": r.epsilon,
                    "tpr": r.tpr,
                    "tnr": r.tnr,
                    "retained": r.retained,
                    "D_train": [float(v) for v in r.D_train],
                }
                for r in self.rounds
            ],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Ensemble":
        if rec.get("version") != BUNDLE_VERSION:
            raise ShapeError(f"unsupported ensemble bundle version {rec.get('version')}")
        rounds = [
            RoundRecord(
                model=TrainedSVM.from_record(r["svm"]),
                alpha=float(r["alpha"]),
                epsilon=float(r["epsilon"]),
                tpr=float(r["tpr"]),
                tnr=float(r["tnr"]),
                D_train=np.array(r["D_train"], dtype=np.float64),
                retained=bool(r["retained"]),
            )
            for r in rec["rounds"]
        ]
        return cls(
            rounds=rounds,
            perturbation_history=[np.array(k, dtype=np.float64) for k in rec["k_history"]],
            sigma=float(rec["sigma"]),
            C=float(rec["C"]),
            step=float(rec["step"]),
            positive_class=int(rec["positive_class"]),
            negative_class=int(rec["negative_class"]),
            selection=rec.get("selection", "strict"),
            kind=rec.get("kind", "kpboost"),
            theta=rec.get("theta"),
            radii=tuple(rec["radii"]) if rec.get("radii") is not None else None,
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_record()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Ensemble":
        return cls.from_record(json.loads(Path(path).read_text(encoding="utf-8")))


def update_perturbation(k, correct_mask, step: float) -> np.ndarray:
    """Add ``step`` to k_i for every correctly classified point."""
    k = np.asarray(k, dtype=np.float64)
    correct_mask = np.asarray(correct_mask, dtype=bool)
    if k.shape != correct_mask.shape:
        raise ShapeError(f"k {k.shape} and mask {correct_mask.shape} differ in shape")
    if not step > 0:
        raise ParameterError(f"perturbation step must be positive, got {step}")
    return k + step * correct_mask


def round_error(tpr: float, tnr: float) -> float:
    return math.hypot(1.0 - tpr, 1.0 - tnr)


def round_weight(epsilon: float) -> float:
    eps = min(max(epsilon, EPS_MIN), SQRT2 - EPS_MIN)
    return 0.5 * math.log((SQRT2 - eps) / eps)


def _select(epsilons, tprs) -> tuple[list, str]:
    eps = list(epsilons)
    tpr = list(tprs)
    if not eps:
        raise ParameterError("need at least one round")
    cap = 1.0 / SQRT2
    strict = [t for t in range(len(eps)) if eps[t] <= min(eps[0], cap) and tpr[t] >= tpr[0]]
    if strict:
        return strict, "strict"
    relaxed = [t for t in range(len(eps)) if eps[t] <= cap and tpr[t] >= tpr[0]]
    if relaxed:
        return relaxed, "relaxed"
    return [0], "fallback"


def select_rounds(epsilons, tprs) -> list:
    """0-based indices of retained rounds.

    Rounds no worse than round 1 in both epsilon and tpr with epsilon at most
    1/sqrt(2); then the same without the round-1 epsilon cap; then round 1 alone.
    """
    return _select(epsilons, tprs)[0]


def signed_labels(train: Dataset, positive_class: int) -> np.ndarray:
    return np.where(train.labels == positive_class, 1.0, -1.0)


def minority_class(train: Dataset) -> int:
    # argmin returns the lowest id on ties
    return int(np.argmin(train.class_counts))


def _rates(correct, y):
    return float(np.mean(correct[y > 0])), float(np.mean(correct[y < 0]))


def _solve_round(K, y, params: BoostParams, init, t: int) -> TrainedSVM:
    try:
        return solve_dual(K, y, params.C, tol=params.tol, sigma=params.sigma, init=init)
    except ConvergenceError as exc:
        raise ConvergenceError(f"round {t}: {exc}", exc.model) from exc
    except NumericalError as exc:
        raise type(exc)(f"round {t}: {exc}") from exc


def first_round(train: Dataset, params: BoostParams, positive_class: Optional[int] = None,
                K0: Optional[kernels.KernelMatrix] = None) -> TrainedSVM:
    """The round-1 SVM, i.e. a plain SVM on the unperturbed kernel."""
    if positive_class is None:
        positive_class = minority_class(train)
    K = K0 if K0 is not None else kernels.gram(train.features, params.sigma)
    return _solve_round(K, signed_labels(train, positive_class), params, None, 1)


Retention = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def boost(train: Dataset, params: BoostParams, positive_class: Optional[int] = None,
          K0: Optional[kernels.KernelMatrix] = None, retention: Optional[Retention] = None,
          kind: str = "kpboost", round1: Optional[TrainedSVM] = None) -> Ensemble:
    """Shared training loop; ``retention`` may shrink the set of points whose k grows.

    ``retention(correct_mask, misclassified_pos, misclassified_neg)`` returns the
    reduced boolean mask. ``round1`` is an already trained SVM on the unperturbed
    kernel with the same labels and C; it does not depend on the step, so grid
    searches can share it.
    """
    if train.n_classes != 2:
        raise DataError(f"binary boosting needs exactly two classes, got {train.n_classes}")
    if positive_class is None:
        positive_class = minority_class(train)
    negative_class = 1 - positive_class
    y = signed_labels(train, positive_class)
    K = K0 if K0 is not None else kernels.gram(train.features, params.sigma)

    n = train.n
    k = np.zeros(n)
    f_prev = np.zeros(n)
    history, records = [], []
    lam_prev = None
    for t in range(1, params.rounds + 1):
        D = kernels.transformation_factors(k, f_prev)
        K = kernels.perturb(K, D)
        if t == 1 and round1 is not None:
            if round1.lam.shape != (n,) or round1.C != params.C or not np.array_equal(round1.labels_signed, y):
                raise ShapeError("round1 model does not match the training problem")
            model = round1
        else:
            # the previous solution stays feasible: perturbation only changes the kernel
            model = _solve_round(K, y, params, lam_prev, t)
        model = replace(model, round_index=t)
        lam_prev = model.lam
        f = decision_values(model, K)
        correct = sign(f) == y
        tpr, tnr = _rates(correct, y)
        eps = round_error(tpr, tnr)
        records.append(RoundRecord(model, round_weight(eps), eps, tpr, tnr, D))
        history.append(k)

        mask = correct
        if retention is not None:
            mask = retention(correct, np.flatnonzero(~correct & (y > 0)),
                             np.flatnonzero(~correct & (y < 0)))
        k = update_perturbation(k, mask, params.step)
        f_prev = f

    keep, rule = _select([r.epsilon for r in records], [r.tpr for r in records])
    records = [replace(r, retained=(t in keep)) for t, r in enumerate(records)]
    return Ensemble(records, history, params.sigma, params.C, params.step,
                    int(positive_class), int(negative_class), rule, kind)


def fit(train: Dataset, params: BoostParams, positive_class: Optional[int] = None,
        K0: Optional[kernels.KernelMatrix] = None, round1: Optional[TrainedSVM] = None) -> Ensemble:
    """Train KPBoost-SVM. The minority class is the positive class unless given."""
    return boost(train, params, positive_class, K0, round1=round1)


def _combine(ens: Ensemble, rounds_out) -> Prediction:
    w = ens.weights
    margin = np.zeros_like(rounds_out[0])
    score = np.zeros_like(rounds_out[0])
    for wt, f in zip(w, rounds_out):
        if wt != 0.0:
            margin += wt * sign(f)
            score += wt * f
    score /= w.sum()
    labels = np.where(margin >= 0, ens.positive_class, ens.negative_class)
    return Prediction(labels, margin, score)


def raw_round_scores(ens: Ensemble, train: Dataset, test: Dataset) -> np.ndarray:
    """(T, m) kernel expansions of every round before test factors and bias.

    Train-side factors act on rows of the cross kernel, so their running product
    folds into the expansion weights and one matrix product covers all rounds.
    """
    if not ens.retained:
        raise NumericalError("ensemble has no retained rounds")
    Kc = kernels.rbf_cross(train.features, test.features, ens.sigma)
    if Kc.shape[0] != ens.rounds[0].model.lam.shape[0]:
        raise ShapeError(f"ensemble was trained on {ens.rounds[0].model.lam.shape[0]} points, got {train.n}")
    D_cum = np.ones(train.n)
    W = np.empty((len(ens.rounds), train.n))
    for t, r in enumerate(ens.rounds):
        D_cum = D_cum * r.D_train
        W[t] = r.model.coef * D_cum
    return W @ Kc


def round_outputs(ens: Ensemble, train: Dataset, test: Dataset) -> list:
    """Decision values of every round on ``test`` with test factors fixed at 1."""
    G = raw_round_scores(ens, train, test)
    return [G[t] + r.model.bias for t, r in enumerate(ens.rounds)]


def predict(ens: Ensemble, train: Dataset, test: Dataset) -> Prediction:
    return _combine(ens, round_outputs(ens, train, test))


def training_predictions(ens: Ensemble, train: Dataset) -> Prediction:
    """Ensemble vote on the training set using each round's own perturbed kernel."""
    K = kernels.gram(train.features, ens.sigma)
    out = []
    for r in ens.rounds:
        K = kernels.perturb(K, r.D_train)
        out.append(decision_values(r.model, K))
    return _combine(ens, out)
