"""Gaussian RBF kernels and the per-point conformal rescaling applied between boosting rounds."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import NumericalError, ParameterError, ShapeError

# sigma search grid: 0.01..0.1, 0.2..1, 2..10, 20..100, 200
SIGMA_GRID = tuple(
    [round(0.01 * i, 2) for i in range(1, 11)]
    + [round(0.1 * i, 1) for i in range(2, 11)]
    + [float(i) for i in range(2, 11)]
    + [float(i) for i in range(20, 101, 10)]
    + [200.0]
)

GRAM_MAGIC = b"KPBK"


def _check_sigma(sigma):
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")


def rbf(x, x2, sigma: float) -> float:
    _check_sigma(sigma)
    diff = np.asarray(x, dtype=np.float64) - np.asarray(x2, dtype=np.float64)
    return float(np.exp(-np.dot(diff, diff) / (2.0 * sigma**2)))


def rbf_cross(X, Z, sigma: float) -> np.ndarray:
    """n x m matrix of kernel values between rows of X and rows of Z."""
    _check_sigma(sigma)
    X = np.asarray(X, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Z))):
        raise NumericalError("non-finite feature value in kernel input")
    if X.ndim != 2 or Z.ndim != 2 or X.shape[1] != Z.shape[1]:
        raise ShapeError(f"incompatible inputs {X.shape} and {Z.shape}")
    return np.exp(-cdist(X, Z, "sqeuclidean") / (2.0 * sigma**2))


@dataclass(frozen=True)
class KernelMatrix:
    values: np.ndarray
    sigma: float = float("nan")

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ShapeError(f"kernel matrix must be square, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def gram(X, sigma: float) -> KernelMatrix:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[0] < 1:
        raise ShapeError("gram needs at least one point")
    K = rbf_cross(X, X, sigma)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return KernelMatrix(K, float(sigma))


@dataclass(frozen=True)
class PerturbationState:
    """Per-point perturbation parameters ``k`` for one boosting round (rounds count from 1)."""

    k: np.ndarray
    round: int = 1

    @classmethod
    def initial(cls, n: int) -> "PerturbationState":
        return cls(np.zeros(n), 1)


def transformation_factors(state, f_prev) -> np.ndarray:
    """exp(-k_i * f_prev_i**2) for every point; ``state`` may be a PerturbationState or the k vector."""
    k = np.asarray(getattr(state, "k", state), dtype=np.float64)
    f_prev = np.asarray(f_prev, dtype=np.float64)
    if k.shape != f_prev.shape:
        raise ShapeError(f"k has shape {k.shape} but decision values have {f_prev.shape}")
    if np.any(k < 0):
        raise NumericalError("negative perturbation parameter: perturbation state is corrupted")
    # exp underflows to 0 once k*f**2 > ~745; keep factors strictly positive
    return np.maximum(np.exp(-k * f_prev**2), np.finfo(np.float64).tiny)


def _check_factors(D):
    D = np.asarray(D, dtype=np.float64)
    if np.any(D <= 0) or np.any(D > 1) or not np.all(np.isfinite(D)):
        raise ParameterError("transformation factors must lie in (0, 1]")
    return D


def perturb(K: KernelMatrix, D) -> KernelMatrix:
    """Conformal rescaling diag(D) K diag(D)."""
    D = _check_factors(D)
    if D.shape != (K.n,):
        raise ShapeError(f"expected {K.n} factors, got {D.shape}")
    return KernelMatrix(D[:, None] * K.values * D[None, :], K.sigma)


def perturb_cross(K_cross, D_train, D_test) -> np.ndarray:
    K_cross = np.asarray(K_cross, dtype=np.float64)
    D_train = _check_factors(D_train)
    D_test = _check_factors(D_test)
    if K_cross.ndim != 2 or K_cross.shape != (D_train.shape[0], D_test.shape[0]):
        raise ShapeError(f"cross kernel {K_cross.shape} does not match factors "
                         f"{D_train.shape[0]} x {D_test.shape[0]}")
    return D_train[:, None] * K_cross * D_test[None, :]


def min_eig_ratio(K) -> float:
    """Smallest eigenvalue divided by the largest; PSD within tolerance means >= -1e-8."""
    v = np.asarray(getattr(K, "values", K))
    w = np.linalg.eigvalsh(v)
    top = max(abs(w[-1]), np.finfo(float).tiny)
    return float(w[0] / top)


def dump_gram(K: KernelMatrix, path) -> None:
    """Little-endian dump: 16-byte header (magic, u32 n, two reserved u32) then row-major f64."""
    header = struct.pack("<4sIII", GRAM_MAGIC, K.n, 0, 0)
    with Path(path).open("wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(K.values, dtype="<f8").tobytes())


def load_gram(path, sigma: float = float("nan")) -> KernelMatrix:
    raw = Path(path).read_bytes()
    magic, n, _, _ = struct.unpack_from("<4sIII", raw)
    if magic != GRAM_MAGIC:
        raise ShapeError(f"{path}: bad magic {magic!r}")
    vals = np.frombuffer(raw, dtype="<f8", offset=16)
    if vals.size != n * n:
        raise ShapeError(f"{path}: expected {n * n} values, found {vals.size}")
    return KernelMatrix(vals.reshape(n, n).astype(np.float64), sigma)
