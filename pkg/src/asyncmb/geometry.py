"""Distance generating functions, Bregman distances, and norm pairs.

Two geometries are built in: the Euclidean half-squared-norm over R^n
(paired with the l2 norm) and the negative entropy over the probability
simplex (paired with the l1 norm).  Both have strong-convexity modulus 1
with respect to their primal norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EUCLIDEAN = "euclidean"
ENTROPY = "entropy"

L2 = "l2"
L1 = "l1"

# Entropy iterates approach the simplex boundary geometrically; coordinates
# below this floor are lifted before taking logs.
ENTROPY_FLOOR = 1e-12


class DomainError(ValueError):
    """Input lies outside the domain of the distance generator."""


@dataclass(frozen=True)
class DistanceGenerator:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, ENTROPY):
            raise ValueError(f"unknown distance generator kind: {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be positive")


@dataclass(frozen=True)
class NormPair:
    primal: str

    def __post_init__(self):
        if self.primal not in (L2, L1):
            raise ValueError(f"unknown primal norm: {self.primal!r}")

    @property
    def dual(self) -> str:
        return "l2" if self.primal == L2 else "linf"


def primal_norm(norms: NormPair, v: np.ndarray) -> float:
    if norms.primal == L2:
        return float(np.linalg.norm(v))
    return float(np.abs(v).sum())


def dual_norm(norms: NormPair, v: np.ndarray) -> float:
    if norms.primal == L2:
        return float(np.linalg.norm(v))
    return float(np.abs(v).max()) if v.size else 0.0


def _check_entropy_domain(x: np.ndarray) -> None:
    if np.any(x <= 0.0):
        raise DomainError("entropy geometry requires strictly positive coordinates")


def omega_value(dg: DistanceGenerator, x: np.ndarray) -> float:
    """Value of the distance generating function.

    The entropy generator is shifted by +log(n) so it is nonnegative on the
    simplex.  Exact zero coordinates contribute 0 (the analytic continuation
    of x*log(x)); value queries therefore accept the closed simplex.
    """
    x = np.asarray(x, dtype=float)
    if dg.kind == EUCLIDEAN:
        return float(0.5 * x @ x)
    if np.any(x < 0.0):
        raise DomainError("entropy geometry requires nonnegative coordinates")
    pos = x > 0.0
    return float(np.sum(x[pos] * np.log(x[pos]))) + np.log(dg.dim)


def grad_omega(dg: DistanceGenerator, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if dg.kind == EUCLIDEAN:
        return x.copy()
    _check_entropy_domain(x)
    return 1.0 + np.log(np.maximum(x, ENTROPY_FLOOR))


def bregman(dg: DistanceGenerator, x: np.ndarray, y: np.ndarray) -> float:
    """Bregman distance D(x, y); the gradient is taken at the first argument.

    For the Euclidean generator this is half the squared l2 distance; for the
    entropy generator it equals the KL divergence sum(y_i * log(y_i / x_i))
    (the +log n shift cancels).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if dg.kind == EUCLIDEAN:
        d = y - x
        return float(0.5 * d @ d)
    _check_entropy_domain(x)
    _check_entropy_domain(y)
    xs = np.maximum(x, ENTROPY_FLOOR)
    ys = np.maximum(y, ENTROPY_FLOOR)
    val = float(np.sum(ys * np.log(ys / xs))) + float(np.sum(x) - np.sum(y))
    # guard tiny negative round-off at x == y
    return max(val, 0.0)


def variance_constant(dg: DistanceGenerator, norms: NormPair, b: int) -> float:
    """Geometry-dependent constant in the averaged-gradient variance bound.

    Equals 1 for the l2/l2 pairing and 2*max omega over the unit primal ball
    otherwise (2*log n for the shifted entropy).  The result is clamped to
    [1, b], the range the bound is stated for.
    """
    if b < 1:
        raise ValueError("batch size must be >= 1")
    if norms.dual == "l2":
        c = 1.0
    else:
        c = 2.0 * np.log(dg.dim)
    return float(min(max(c, 1.0), float(b)))
