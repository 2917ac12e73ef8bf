"""Dataset ingestion, synthetic problems with known optima, and CSV output.

libsvm text files use 1-based feature indices; everything internal is
0-based.  Synthetic generators certify their optimizer at construction by a
first-order optimality residual below 1e-9, so tests may treat x_star as
exact ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import oracle as _oracle
from .composite import (ELASTIC_NET, L1_REG, L2_BALL, L2_REG, ZERO,
                        ProblemSpec, Regularizer, phi_value, soft_threshold)
from .geometry import EUCLIDEAN, L2, DistanceGenerator, NormPair
from .oracle import DataPoint

_DENSE_LIMIT = 2_000_000  # entries; small matrices are kept dense


class ParseError(ValueError):
    """Malformed dataset file; message carries the 1-based line number."""


@dataclass
class Dataset:
    points: list
    n: int
    meta: str = ""
    _matrix: object = field(default=None, repr=False, compare=False)
    _labels: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for p in self.points:
            if len(p.indices) and p.indices[-1] >= self.n:
                raise ValueError("feature index out of range")

    def feature_matrix(self):
        """Row-major feature matrix; dense when small, CSR otherwise."""
        if self._matrix is None:
            m = len(self.points)
            indptr = np.zeros(m + 1, dtype=np.int64)
            for i, p in enumerate(self.points):
                indptr[i + 1] = indptr[i] + len(p.indices)
            indices = np.concatenate([p.indices for p in self.points]) \
                if m else np.empty(0, dtype=np.int64)
            data = np.concatenate([p.values for p in self.points]) \
                if m else np.empty(0)
            mat = sp.csr_matrix((data, indices.astype(np.int64), indptr),
                                shape=(m, self.n))
            self._matrix = mat.toarray() if m * self.n <= _DENSE_LIMIT else mat
        return self._matrix

    def label_vector(self) -> np.ndarray:
        if self._labels is None:
            self._labels = np.array([p.label for p in self.points], dtype=float)
        return self._labels

    @classmethod
    def from_dense(cls, A: np.ndarray, y: np.ndarray, meta: str = "") -> "Dataset":
        n = A.shape[1]
        pts = []
        for row, label in zip(A, y):
            idx = np.nonzero(row)[0]
            pts.append(DataPoint(idx.astype(np.int64), row[idx].astype(float),
                                 float(label)))
        return cls(pts, n, meta)


def read_libsvm(path, n: int | None = None, coerce_labels: bool = True) -> Dataset:
    """Parse 'label idx:val idx:val ...' lines; 1-based indices in the file
    become 0-based.  Labels 0 are coerced to -1 when coerce_labels is set."""
    points = []
    max_idx = -1
    try:
        fh = open(path)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise ParseError(f"line {lineno}: bad label {tokens[0]!r}")
            if coerce_labels:
                label = -1.0 if label <= 0 else 1.0
            idx, vals, prev = [], [], -1
            for tok in tokens[1:]:
                try:
                    raw_i, raw_v = tok.split(":", 1)
                    i = int(raw_i) - 1
                    v = float(raw_v)
                except ValueError:
                    raise ParseError(f"line {lineno}: bad token {tok!r}")
                if i <= prev:
                    raise ParseError(f"line {lineno}: indices must increase")
                if i < 0:
                    raise ParseError(f"line {lineno}: index must be >= 1")
                prev = i
                idx.append(i)
                vals.append(v)
            if idx:
                max_idx = max(max_idx, idx[-1])
            points.append(DataPoint(np.array(idx, dtype=np.int64),
                                    np.array(vals), label))
    dim = n if n is not None else max_idx + 1
    return Dataset(points, max(dim, 1), meta=str(path))


def write_libsvm(dataset: Dataset, path) -> None:
    with open(path, "w") as fh:
        for p in dataset.points:
            feats = " ".join(f"{int(i) + 1}:{float(v)!r}" for i, v in
                             zip(p.indices, p.values))
            fh.write(f"{p.label:g} {feats}".rstrip() + "\n")


@dataclass
class SyntheticProblem:
    dataset: Dataset
    problem: ProblemSpec
    x_star: np.ndarray
    phi_star: float
    residual: float


def _l2_problem(loss: str, reg: Regularizer, n: int) -> ProblemSpec:
    return ProblemSpec(loss, reg, DistanceGenerator(EUCLIDEAN, n), NormPair(L2), n)


def _lasso_residual(A, y, lam, x) -> float:
    g = A.T @ (A @ x - y) / len(y)
    on = x != 0
    r = np.where(on, np.abs(g + lam * np.sign(x)), np.maximum(np.abs(g) - lam, 0.0))
    return float(np.max(r))


def _fista_lasso(A, y, lam, tol=1e-11, max_iter=200_000) -> np.ndarray:
    m = len(y)
    step = 1.0 / (np.linalg.norm(A, 2) ** 2 / m)
    x = np.zeros(A.shape[1])
    z, t = x.copy(), 1.0
    for _ in range(max_iter):
        g = A.T @ (A @ z - y) / m
        x_new = soft_threshold(z - step * g, step * lam)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        z = x_new + (t - 1.0) / t_new * (x_new - x)
        x, t = x_new, t_new
        if _lasso_residual(A, y, lam, x) < tol:
            break
    return x


def gen_lasso(n: int, m: int, sparsity: int, noise: float, lam: float,
              seed: int) -> SyntheticProblem:
    """Squared loss + l1 penalty on a random design with a planted sparse
    signal.  The optimizer comes from a deterministic full-batch proximal
    gradient solve, independent of the stochastic method under test."""
    if not 0 < sparsity <= n:
        raise ValueError("need 0 < sparsity <= n")
    if m < n:
        raise ValueError("need m >= n")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    x_plant = np.zeros(n)
    support = rng.choice(n, size=sparsity, replace=False)
    x_plant[support] = rng.choice([-1.0, 1.0], size=sparsity)
    y = A @ x_plant + noise * rng.standard_normal(m)

    x_star = _fista_lasso(A, y, lam)
    res = _lasso_residual(A, y, lam, x_star)
    if res >= 1e-9:
        raise RuntimeError(f"lasso optimizer residual {res:g} too large")

    dataset = Dataset.from_dense(A, y, meta=f"lasso(n={n},m={m},seed={seed})")
    problem = _l2_problem(_oracle.SQUARED, Regularizer(L1_REG, lam=lam), n)
    phi_star = phi_value(problem, dataset, x_star)
    return SyntheticProblem(dataset, problem, x_star, phi_star, res)


def gen_strongly_convex(n: int, m: int, rho: float, seed: int,
                        noise: float = 0.1) -> SyntheticProblem:
    """Squared loss + (rho/2)||x||^2; the optimizer is a direct linear solve."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    x_plant = rng.standard_normal(n) / math.sqrt(n)
    y = A @ x_plant + noise * rng.standard_normal(m)

    H = A.T @ A / m + rho * np.eye(n)
    x_star = np.linalg.solve(H, A.T @ y / m)
    res = float(np.max(np.abs(A.T @ (A @ x_star - y) / m + rho * x_star)))
    if res >= 1e-9:
        raise RuntimeError(f"ridge optimizer residual {res:g} too large")

    dataset = Dataset.from_dense(A, y, meta=f"ridge(n={n},m={m},seed={seed})")
    problem = _l2_problem(_oracle.SQUARED, Regularizer(L2_REG, rho=rho), n)
    phi_star = phi_value(problem, dataset, x_star)
    return SyntheticProblem(dataset, problem, x_star, phi_star, res)


def gen_logistic_ball(n: int, m: int, radius: float, seed: int,
                      flip: float = 0.05) -> SyntheticProblem:
    """Logistic loss constrained to an l2 ball (compact domain).

    The optimizer comes from an accelerated full-batch projected gradient
    solve run to first-order residual < 1e-9.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    w = rng.standard_normal(n)
    w /= np.linalg.norm(w)
    y = np.sign(A @ w + 1e-12)
    flips = rng.random(m) < flip
    y[flips] *= -1.0

    def grad(x):
        marg = A @ x
        coef = _oracle.loss_coefficient(_oracle.LOGISTIC, marg, y)
        return A.T @ coef / m

    def project(v):
        r = np.linalg.norm(v)
        return v if r <= radius else v * (radius / r)

    def residual(x):
        return float(np.max(np.abs(x - project(x - grad(x)))))

    step = 4.0 / (np.linalg.norm(A, 2) ** 2 / m)  # 1/L for logistic
    x = np.zeros(n)
    z, t = x.copy(), 1.0
    res = residual(x)
    for _ in range(500_000):
        x_new = project(z - step * grad(z))
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        z = x_new + (t - 1.0) / t_new * (x_new - x)
        x, t = x_new, t_new
        res = residual(x)
        if res < 1e-10:
            break
    if res >= 1e-9:
        raise RuntimeError(f"ball-constrained optimizer residual {res:g} too large")

    dataset = Dataset.from_dense(A, y, meta=f"logit_ball(n={n},m={m},seed={seed})")
    problem = _l2_problem(_oracle.LOGISTIC, Regularizer(L2_BALL, radius=radius), n)
    phi_star = phi_value(problem, dataset, x)
    return SyntheticProblem(dataset, problem, x, phi_star, res)


def gen_sparse_logistic(n: int, m: int, nnz_per_row: int, seed: int):
    """Large sparse logistic dataset for timing runs (no certified optimum)."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(n) / math.sqrt(nnz_per_row)
    points = []
    for _ in range(m):
        idx = np.sort(rng.choice(n, size=nnz_per_row, replace=False))
        vals = rng.standard_normal(nnz_per_row)
        label = 1.0 if vals @ w[idx] >= 0 else -1.0
        points.append(DataPoint(idx.astype(np.int64), vals, label))
    dataset = Dataset(points, n, meta=f"sparse_logit(n={n},m={m},seed={seed})")
    problem = _l2_problem(_oracle.LOGISTIC, Regularizer(ZERO), n)
    return dataset, problem


def write_csv(report, path) -> None:
    """Checkpoint trace as CSV; floats carry 17 significant digits so the
    file round-trips bit-exactly."""
    with open(path, "w") as fh:
        fh.write("k,phi,dist_sq,tau,gamma,wall_ns\n")
        for c in report.checkpoints:
            fh.write(f"{c.k},{c.phi:.17g},{c.dist_sq:.17g},{c.tau},"
                     f"{c.gamma:.17g},{c.wall_ns}\n")


def read_csv(path):
    """Inverse of write_csv, for round-trip checks."""
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            vals = line.strip().split(",")
            rows.append({h: v for h, v in zip(header, vals)})
    return rows
