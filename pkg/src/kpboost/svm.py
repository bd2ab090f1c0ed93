"""C-SVM dual solver on a precomputed kernel.

Two-variable decomposition: each iteration picks the maximal KKT-violating
pair and solves the two-variable subproblem analytically. Variables stuck at
a bound are shrunk out of the scans and rechecked on the full problem before
stopping. The dual is kept
in minimisation form ``0.5 a'Qa - e'a`` with ``Q_ij = y_i y_j K_ij``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConvergenceError, InfeasibleError, ParameterError, ShapeError

DEFAULT_TOL = 1e-3
COST_GRID = (100.0, 1000.0)
RECORD_VERSION = 1

_TAU = 1e-12


@numba.njit(cache=True)
def _full_gradient(K, y, alpha, grad):
    n = y.shape[0]
    for r in range(n):
        grad[r] = -1.0
    for t in range(n):
        if alpha[t] != 0.0:
            c = y[t] * alpha[t]
            for r in range(n):
                grad[r] += y[r] * c * K[t, r]


@numba.njit(cache=True)
def _smo(K, y, C, tol, max_iter, second_order, alpha0):
    n = y.shape[0]
    alpha = alpha0.copy()
    grad = np.empty(n)
    _full_gradient(K, y, alpha, grad)
    # active set: bound variables that cannot join a violating pair are dropped
    # from the scans and their gradients go stale until the next full rebuild
    active = np.arange(n)
    m = n
    shrink_every = min(n, 1000)
    countdown = shrink_every
    it = 0
    gap = np.inf
    # pending update from the previous iteration, applied inside the scan
    s = 0.0
    pi = 0
    pj = 0
    while True:
        # i: argmax of -y*grad over I_up, j: argmin over I_low; first index wins ties
        i = -1
        j = -1
        gmax = -np.inf
        gmin = np.inf
        for q in range(m):
            t = active[q]
            if s != 0.0:
                grad[t] += y[t] * s * (K[pi, t] - K[pj, t])
            v = -y[t] * grad[t]
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                if v > gmax:
                    gmax = v
                    i = t
            if (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0):
                if v < gmin:
                    gmin = v
                    j = t
        s = 0.0
        done = i < 0 or j < 0
        gap = 0.0 if done else gmax - gmin
        if done or gap <= tol or it >= max_iter:
            if m < n:
                # verify on the full problem before stopping
                _full_gradient(K, y, alpha, grad)
                m = n
                for q in range(n):
                    active[q] = q
                countdown = shrink_every
                continue
            break
        countdown -= 1
        if countdown <= 0:
            countdown = shrink_every
            k = 0
            for q in range(m):
                t = active[q]
                up = (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0)
                low = (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0)
                v = -y[t] * grad[t]
                if up and not low and v < gmin:
                    continue
                if low and not up and v > gmax:
                    continue
                active[k] = t
                k += 1
            m = k
        if second_order:
            # keep i, pick j in I_low maximising the guaranteed decrease b^2 / a
            best = -np.inf
            for q in range(m):
                t = active[q]
                if (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0):
                    b = gmax + y[t] * grad[t]
                    if b > 0.0:
                        a = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        if a <= 0.0:
                            a = _TAU
                        gain = b * b / a
                        if gain > best:
                            best = gain
                            j = t
        # move alpha_i by y_i*s and alpha_j by -y_j*s, s >= 0
        curv = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if curv <= 0.0:
            curv = _TAU
        s = (gmax + y[j] * grad[j]) / curv
        room_i = C - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else C - alpha[j]
        if room_i < s:
            s = room_i
        if room_j < s:
            s = room_j
        alpha[i] += y[i] * s
        alpha[j] -= y[j] * s
        # snap to bounds so sv membership is exact
        if alpha[i] < 0.0 or (y[i] < 0 and s == room_i):
            alpha[i] = 0.0
        elif alpha[i] > C or (y[i] > 0 and s == room_i):
            alpha[i] = C
        if alpha[j] < 0.0 or (y[j] > 0 and s == room_j):
            alpha[j] = 0.0
        elif alpha[j] > C or (y[j] < 0 and s == room_j):
            alpha[j] = C
        pi = i
        pj = j
        it += 1
    return alpha, grad, it, gap


@dataclass(frozen=True)
class TrainedSVM:
    lam: np.ndarray
    bias: float
    labels_signed: np.ndarray
    C: float
    sigma: float = float("nan")
    n_iter: int = 0
    kkt_gap: float = 0.0
    round_index: int = 0

    @property
    def sv_indices(self) -> np.ndarray:
        return np.flatnonzero(self.lam > 0)

    @property
    def coef(self) -> np.ndarray:
        """lambda_i * y_i, the kernel expansion weights."""
        return self.lam * self.labels_signed

    def to_record(self) -> dict:
        return {
            "version": RECORD_VERSION,
            "round": int(self.round_index),
            "C": float(self.C),
            "sigma": float(self.sigma),
            "bias": float(self.bias),
            "lambda": [float(v) for v in self.lam],
            "labels": [int(v) for v in self.labels_signed],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "TrainedSVM":
        if rec.get("version") != RECORD_VERSION:
            raise ShapeError(f"unsupported svm record version {rec.get('version')}")
        return cls(
            lam=np.array(rec["lambda"], dtype=np.float64),
            bias=float(rec["bias"]),
            labels_signed=np.array(rec["labels"], dtype=np.float64),
            C=float(rec["C"]),
            sigma=float(rec["sigma"]),
            round_index=int(rec["round"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_record())


def _as_matrix(K):
    return np.ascontiguousarray(getattr(K, "values", K), dtype=np.float64)


def dual_objective(K, y, lam) -> float:
    """sum(lam) - 0.5 * sum_ij lam_i lam_j y_i y_j K_ij (the quantity being maximised)."""
    v = np.asarray(lam) * np.asarray(y, dtype=np.float64)
    return float(np.sum(lam) - 0.5 * v @ _as_matrix(K) @ v)


def _bias(lam, grad, y, C):
    yg = y * grad
    free = (lam > 0) & (lam < C)
    if np.any(free):
        return -float(np.mean(yg[free]))
    # b = -r; points at a bound only bracket r
    upper = ((y > 0) & (lam <= 0)) | ((y < 0) & (lam >= C))
    lower = ((y > 0) & (lam >= C)) | ((y < 0) & (lam <= 0))
    ub = yg[upper].min() if np.any(upper) else np.inf
    lb = yg[lower].max() if np.any(lower) else -np.inf
    if not np.isfinite(ub):
        ub = lb
    if not np.isfinite(lb):
        lb = ub
    return -float(0.5 * (ub + lb))


def solve_dual(K, y, C: float, tol: float = DEFAULT_TOL, max_passes: int | None = None,
               sigma: float | None = None, selection: str = "second", init=None) -> TrainedSVM:
    """Train a soft-margin SVM on a precomputed kernel.

    Parameters
    ----------
    K : KernelMatrix or (n, n) array
    y : labels in {-1, +1}
    C : box constraint
    tol : stopping threshold on the maximal KKT violation
    max_passes : sweeps over the data before giving up; defaults to ``10 * n``.
        One sweep is ``n`` pair updates.
    selection : ``"first"`` takes the maximal violating pair; ``"second"``
        keeps the maximal violator ``i`` and picks its partner by second-order
        gain, which needs far fewer iterations at large C.
    init : optional feasible starting multipliers (box and equality
        constraints satisfied), e.g. the solution of a nearby problem.
    """
    Km = _as_matrix(K)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if Km.shape != (n, n):
        raise ShapeError(f"kernel {Km.shape} does not match {n} labels")
    if not C > 0 or not tol > 0:
        raise ParameterError("C and tol must be positive")
    if not np.all(np.abs(y) == 1):
        raise ParameterError("labels must be +1 or -1")
    if np.all(y > 0) or np.all(y < 0):
        raise InfeasibleError("both label values are needed; the equality constraint forces lambda = 0")
    if max_passes is None:
        max_passes = 10 * n
    if sigma is None:
        sigma = float(getattr(K, "sigma", float("nan")))
    if selection not in ("first", "second"):
        raise ParameterError(f"unknown working-set selection {selection!r}")
    if init is None:
        alpha0 = np.zeros(n)
    else:
        alpha0 = np.clip(np.asarray(init, dtype=np.float64), 0.0, C)
        if alpha0.shape != (n,) or abs(float(alpha0 @ y)) > 1e-8 * max(1.0, C * n):
            raise ParameterError("initial multipliers must be feasible")
    lam, grad, n_iter, gap = _smo(Km, y, float(C), float(tol), int(max_passes) * n,
                                  selection == "second", alpha0)
    model = TrainedSVM(lam, _bias(lam, grad, y, C), y.copy(), float(C), sigma, int(n_iter), float(gap))
    if gap > tol:
        raise ConvergenceError(f"no convergence after {n_iter} iterations (KKT gap {gap:.3g})", model)
    return model


def kkt_violation(model: TrainedSVM, K) -> float:
    """Maximal violating-pair gap m(lam) - M(lam), recomputed from scratch."""
    Km = _as_matrix(K)
    y, lam, C = model.labels_signed, model.lam, model.C
    grad = y * (Km @ (lam * y)) - 1.0
    v = -y * grad
    up = ((y > 0) & (lam < C)) | ((y < 0) & (lam > 0))
    low = ((y < 0) & (lam < C)) | ((y > 0) & (lam > 0))
    if not np.any(up) or not np.any(low):
        return 0.0
    return float(max(v[up].max() - v[low].min(), 0.0))


def decision_values(model: TrainedSVM, K_cols) -> np.ndarray:
    """f_j = sum_i lam_i y_i K_ij + b for every query column of ``K_cols``."""
    K_cols = np.asarray(getattr(K_cols, "values", K_cols), dtype=np.float64)
    if K_cols.ndim != 2 or K_cols.shape[0] != model.lam.shape[0]:
        raise ShapeError(f"kernel columns {K_cols.shape} do not match {model.lam.shape[0]} training points")
    sv = model.sv_indices
    return model.coef[sv] @ K_cols[sv] + model.bias


def sign(f) -> np.ndarray:
    """Sign with sign(0) = +1."""
    return np.where(np.asarray(f) >= 0, 1, -1)


def predict(model: TrainedSVM, K_cols) -> np.ndarray:
    return sign(decision_values(model, K_cols))
