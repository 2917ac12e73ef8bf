"""Regularizers, objective evaluation, and the composite mirror-descent step.

The step solves  argmin_z  <g, z> + Psi(z) + (1/gamma) * D(x, z)  in closed
form for every supported (geometry, regularizer) pair.  Unsupported pairs
fail fast instead of falling back to a slow numeric path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import oracle as _oracle
from .geometry import (ENTROPY, ENTROPY_FLOOR, EUCLIDEAN, L1, L2,
                       DistanceGenerator, NormPair)

ZERO = "zero"
L2_BALL = "l2_ball"
SIMPLEX = "simplex"
L1_REG = "l1"
L1_L2_BALL = "l1_l2_ball"
L2_REG = "l2"
ELASTIC_NET = "elastic_net"

_KINDS = (ZERO, L2_BALL, SIMPLEX, L1_REG, L1_L2_BALL, L2_REG, ELASTIC_NET)

# membership slack for indicator evaluation, to absorb float round-off from
# exact projections
_INDICATOR_TOL = 1e-9


class ConfigurationError(ValueError):
    """Unsupported combination of problem ingredients."""


@dataclass(frozen=True)
class Regularizer:
    kind: str
    lam: float = 0.0
    rho: float = 0.0
    radius: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown regularizer kind: {self.kind!r}")
        if self.kind in (L1_REG, L1_L2_BALL, ELASTIC_NET) and self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.kind in (L2_REG, ELASTIC_NET) and self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.kind in (L2_BALL, L1_L2_BALL) and self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def mu_psi(self) -> float:
        """Strong-convexity modulus (w.r.t. l2)."""
        return self.rho if self.kind in (L2_REG, ELASTIC_NET) else 0.0


def psi_value(reg: Regularizer, x: np.ndarray) -> float:
    """Regularizer value; +inf exactly when an indicator is violated."""
    x = np.asarray(x, dtype=float)
    if reg.kind == ZERO:
        return 0.0
    if reg.kind == L2_BALL:
        r = float(np.linalg.norm(x))
        return 0.0 if r <= reg.radius * (1 + _INDICATOR_TOL) + _INDICATOR_TOL else math.inf
    if reg.kind == SIMPLEX:
        ok = np.all(x >= -_INDICATOR_TOL) and abs(float(x.sum()) - 1.0) <= _INDICATOR_TOL
        return 0.0 if ok else math.inf
    if reg.kind == L1_REG:
        return reg.lam * float(np.abs(x).sum())
    if reg.kind == L1_L2_BALL:
        r = float(np.linalg.norm(x))
        if r > reg.radius * (1 + _INDICATOR_TOL) + _INDICATOR_TOL:
            return math.inf
        return reg.lam * float(np.abs(x).sum())
    if reg.kind == L2_REG:
        return 0.5 * reg.rho * float(x @ x)
    # elastic net
    return reg.lam * float(np.abs(x).sum()) + 0.5 * reg.rho * float(x @ x)


def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _ball_project(v: np.ndarray, radius: float) -> np.ndarray:
    r = np.linalg.norm(v)
    if r <= radius:
        return v
    return v * (radius / r)


def mirror_step(dg: DistanceGenerator, reg: Regularizer, x: np.ndarray,
                g: np.ndarray, gamma: float) -> np.ndarray:
    """Exact minimizer of <g, z> + Psi(z) + (1/gamma) D(x, z)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    if dg.kind == EUCLIDEAN:
        v = x - gamma * g
        if reg.kind == ZERO:
            return v
        if reg.kind == L2_BALL:
            return _ball_project(v, reg.radius)
        if reg.kind == L1_REG:
            return soft_threshold(v, gamma * reg.lam)
        if reg.kind == L1_L2_BALL:
            # soft-threshold then radial projection is exact (KKT)
            return _ball_project(soft_threshold(v, gamma * reg.lam), reg.radius)
        if reg.kind == L2_REG:
            return v / (1.0 + gamma * reg.rho)
        if reg.kind == ELASTIC_NET:
            return soft_threshold(v, gamma * reg.lam) / (1.0 + gamma * reg.rho)
    elif dg.kind == ENTROPY and reg.kind == SIMPLEX:
        # exponentiated gradient; renormalize to stop simplex drift
        xs = np.maximum(x, ENTROPY_FLOOR)
        logz = np.log(xs) - gamma * g
        logz -= logz.max()
        z = np.exp(logz)
        return z / z.sum()
    raise ConfigurationError(
        f"unsupported (geometry, regularizer) pair: ({dg.kind}, {reg.kind})")


@dataclass(frozen=True)
class ProblemSpec:
    """Everything defining the composite objective phi = f + Psi."""

    loss: str
    reg: Regularizer
    dg: DistanceGenerator
    norms: NormPair
    n: int

    def __post_init__(self):
        if self.loss not in (_oracle.LOGISTIC, _oracle.SQUARED):
            raise ConfigurationError(f"unknown loss: {self.loss!r}")
        if self.dg.kind == EUCLIDEAN and self.norms.primal != L2:
            raise ConfigurationError("euclidean geometry pairs with the l2 norm")
        if self.dg.kind == ENTROPY and self.norms.primal != L1:
            raise ConfigurationError("entropy geometry pairs with the l1 norm")
        if self.dg.kind == ENTROPY and self.reg.kind != SIMPLEX:
            raise ConfigurationError("entropy geometry supports only the simplex indicator")
        if self.dg.kind == EUCLIDEAN and self.reg.kind == SIMPLEX:
            raise ConfigurationError("simplex indicator requires entropy geometry")
        if self.dg.dim != self.n:
            raise ConfigurationError("geometry dimension does not match problem dimension")


def phi_value(problem: ProblemSpec, dataset, x: np.ndarray,
              rows: np.ndarray | None = None) -> float:
    """Empirical composite objective: mean per-sample loss plus Psi."""
    A = dataset.feature_matrix()
    y = dataset.label_vector()
    if rows is not None:
        A, y = A[rows], y[rows]
    margin = np.asarray(A @ x).ravel()
    return float(np.mean(_oracle.loss_value(problem.loss, margin, y))) \
        + psi_value(problem.reg, x)


class CesaroAverage:
    """Running arithmetic mean of the iterates, O(n) per update."""

    def __init__(self, n: int):
        self._sum = np.zeros(n)
        self.count = 0

    def update(self, x: np.ndarray) -> None:
        self._sum += x
        self.count += 1

    @property
    def value(self) -> np.ndarray:
        if self.count == 0:
            raise ValueError("no iterates averaged yet")
        return self._sum / self.count


def cesaro_average(iterates) -> np.ndarray:
    avg = None
    count = 0
    for x in iterates:
        x = np.asarray(x, dtype=float)
        avg = x.copy() if avg is None else avg + x
        count += 1
    if avg is None:
        raise ValueError("need at least one iterate")
    return avg / count
