"""Loss functions, the stochastic gradient oracle, and constant estimation.

The oracle samples with replacement from a fixed dataset (the empirical
distribution), so batch gradients are unbiased estimates of the empirical
mean gradient.  Sampling is counter-based: batch k of stream s under seed q
always yields the same indices, which makes multi-threaded runs replayable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .geometry import NormPair, dual_norm

LOGISTIC = "logistic"
SQUARED = "squared"

_M1 = 0x9E3779B97F4A7C15
_M2 = 0xD1342543DE82EF95
_M3 = 0x2545F4914F6CDD1D
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class DataPoint:
    """One observation: sparse feature vector plus scalar label."""

    indices: np.ndarray
    values: np.ndarray
    label: float

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise ValueError("feature indices must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")

    def dense(self, n: int) -> np.ndarray:
        v = np.zeros(n)
        v[self.indices] = self.values
        return v


_ARANGE_CACHE: dict[int, np.ndarray] = {}


def _lane(b: int) -> np.ndarray:
    lane = _ARANGE_CACHE.get(b)
    if lane is None:
        lane = (np.arange(1, b + 1, dtype=np.uint64) * np.uint64(_M1)) & np.uint64(_U64)
        _ARANGE_CACHE[b] = lane
    return lane


def batch_indices(seed: int, stream: int, counter: int, b: int, m: int) -> np.ndarray:
    """Deterministic sample of b indices in [0, m) for (seed, stream, counter).

    splitmix64-style mixing; counter-based so any (stream, counter) cell can
    be regenerated independently, which is what replay relies on.
    """
    base = (seed * _M1 + stream * _M2 + counter * _M3) & _U64
    x = _lane(b) + np.uint64(base)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    x = x ^ (x >> np.uint64(31))
    return ((x >> np.uint64(11)) % np.uint64(m)).astype(np.intp)


def loss_value(loss: str, margin: np.ndarray, label: np.ndarray) -> np.ndarray:
    """Per-sample loss given the inner products <a, x>."""
    if loss == LOGISTIC:
        return np.logaddexp(0.0, -label * margin)
    if loss == SQUARED:
        return 0.5 * (margin - label) ** 2
    raise ValueError(f"unknown loss: {loss!r}")


def loss_coefficient(loss: str, margin: np.ndarray, label: np.ndarray) -> np.ndarray:
    """Scalar s(t) such that the per-sample gradient is s * a."""
    if loss == LOGISTIC:
        return -label * expit(-label * margin)
    if loss == SQUARED:
        return margin - label
    raise ValueError(f"unknown loss: {loss!r}")


def loss_grad(loss: str, x: np.ndarray, point: DataPoint) -> np.ndarray:
    """Gradient of the per-sample loss at x, returned dense."""
    margin = float(point.values @ x[point.indices])
    coef = loss_coefficient(loss, np.array([margin]), np.array([point.label]))[0]
    g = np.zeros_like(x, dtype=float)
    g[point.indices] = coef * point.values
    return g


def _curvature(loss: str) -> float:
    # max second derivative of the scalar loss in its margin
    return 0.25 if loss == LOGISTIC else 1.0


def lipschitz_bound(loss: str, dataset, norms: NormPair) -> float:
    """Upper bound L on the gradient Lipschitz constant over the dataset.

    Per-sample Hessian is s''(t) * a a^T, so ||grad F(y) - grad F(z)||_* <=
    s''_max * ||a||_*^2 * ||y - z||, and L = s''_max * max_i ||a_i||_*^2.
    """
    if len(dataset.points) == 0:
        raise ValueError("empty dataset")
    worst = 0.0
    for p in dataset.points:
        if norms.dual == "l2":
            nrm2 = float(p.values @ p.values)
        else:
            nrm2 = float(np.abs(p.values).max()) ** 2 if p.values.size else 0.0
        worst = max(worst, nrm2)
    return _curvature(loss) * worst


class StochasticOracle:
    """First-order oracle over a dataset with seeded, splittable sampling."""

    def __init__(self, dataset, loss: str, seed: int):
        self.dataset = dataset
        self.loss = loss
        self.seed = int(seed)
        self.A = dataset.feature_matrix()
        self.y = dataset.label_vector()
        self.m = len(dataset.points)

    def gradient_at(self, x: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Mean gradient over the given dataset rows."""
        A = self.A[rows]
        margin = A @ x
        coef = loss_coefficient(self.loss, margin, self.y[rows])
        g = A.T @ coef
        return np.asarray(g).ravel() / len(rows)

    def batch_gradient(self, x: np.ndarray, b: int, stream: int = 0,
                       counter: int = 0) -> np.ndarray:
        if b < 1:
            raise ValueError("batch size must be >= 1")
        rows = batch_indices(self.seed, stream, counter, b, self.m)
        return self.gradient_at(x, rows)

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        margin = self.A @ x
        coef = loss_coefficient(self.loss, margin, self.y)
        g = self.A.T @ coef
        return np.asarray(g).ravel() / self.m

    def mean_loss(self, x: np.ndarray, rows: np.ndarray | None = None) -> float:
        A, y = (self.A, self.y) if rows is None else (self.A[rows], self.y[rows])
        margin = np.asarray(A @ x).ravel()
        return float(np.mean(loss_value(self.loss, margin, y)))


def estimate_sigma(oracle: StochasticOracle, probe_points, samples_per_point: int,
                   norms: NormPair, seed: int = 0) -> float:
    """Empirical gradient-noise level: sqrt of the worst mean squared
    dual-norm deviation of per-sample gradients from the full gradient,
    maximized over the probe points."""
    probe_points = list(probe_points)
    if not probe_points:
        raise ValueError("need at least one probe point")
    if samples_per_point < 1:
        raise ValueError("samples_per_point must be >= 1")
    worst = 0.0
    for j, x in enumerate(probe_points):
        gfull = oracle.full_gradient(x)
        rows = batch_indices(seed, 1_000_003 + j, 0, samples_per_point, oracle.m)
        acc = 0.0
        for r in rows:
            gi = oracle.gradient_at(x, np.array([r]))
            acc += dual_norm(norms, gi - gfull) ** 2
        worst = max(worst, acc / samples_per_point)
    return float(np.sqrt(worst))
