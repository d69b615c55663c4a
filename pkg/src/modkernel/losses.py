"""Decomposable classification risks and their built-in instantiations.

A decomposable loss splits the empirical risk of a scalar-score binary
classifier into a nonincreasing per-example term on the positive class, a
nondecreasing term on the negative class, and a weight-norm penalty:

    risk = (1/n) sum_{i in I+} ell_plus(score_i)
         + (1/n) sum_{j in I-} ell_minus(score_j)
         + lambda * g(|w|)

Three concrete instantiations are provided (two-class softmax
cross-entropy, tanh + squared error, hinge), plus the standard multiclass
softmax cross-entropy used when training multiclass output modules.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError, DimensionError

LOSS_KINDS = ("xe2", "tanh-mse", "hinge")


def _softplus(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _identity(x):
    return x


@dataclass(frozen=True)
class DecomposableLoss:
    """The (ell_plus, ell_minus, g, lambda) quadruple of a decomposable risk.

    ell_plus must be nonincreasing and ell_minus and g nondecreasing;
    ``monotonicity_audit`` verifies this numerically on a grid.
    """

    kind: str
    ell_plus: callable
    ell_minus: callable
    g: callable = _identity
    lam: float = 0.0


def make_loss(kind: str, lam: float = 0.0, g=None) -> DecomposableLoss:
    kind = kind.replace("_", "-")
    if lam < 0:
        raise ConfigurationError("lambda must be nonnegative")
    g = g if g is not None else _identity
    if kind == "xe2":
        return DecomposableLoss(kind, lambda t: _softplus(-np.asarray(t, float)),
                                lambda t: _softplus(np.asarray(t, float)),
                                g, lam)
    if kind == "tanh-mse":
        return DecomposableLoss(kind, lambda t: (1.0 - np.tanh(t)) ** 2,
                                lambda t: (1.0 + np.tanh(t)) ** 2,
                                g, lam)
    if kind == "hinge":
        return DecomposableLoss(kind, lambda t: np.maximum(0.0, 1.0 - np.asarray(t, float)),
                                lambda t: np.maximum(0.0, 1.0 + np.asarray(t, float)),
                                g, lam)
    raise ConfigurationError(
        f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


@dataclass(frozen=True)
class LabeledSet:
    """Inputs with a binary view: disjoint positive/negative index sets."""

    X: np.ndarray
    y: np.ndarray
    I_plus: np.ndarray
    I_minus: np.ndarray

    @classmethod
    def from_binary_labels(cls, X, y, positive_label=1) -> "LabeledSet":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DimensionError("inputs and labels must align")
        plus = np.flatnonzero(y == positive_label)
        minus = np.flatnonzero(y != positive_label)
        return cls(X=X, y=y, I_plus=plus, I_minus=minus)


def risk(loss: DecomposableLoss, scores, labeled: LabeledSet,
         w_norm: float = 0.0) -> float:
    """The three-term decomposed empirical risk."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.shape[0] != labeled.y.shape[0]:
        raise DimensionError("scores do not align with the labeled set")
    n = scores.shape[0]
    total = 0.0
    if labeled.I_plus.size:
        total += float(np.sum(loss.ell_plus(scores[labeled.I_plus]))) / n
    if labeled.I_minus.size:
        total += float(np.sum(loss.ell_minus(scores[labeled.I_minus]))) / n
    return total + loss.lam * float(loss.g(w_norm))


def risk_tensor(loss: DecomposableLoss, scores: ad.Tensor,
                positive: np.ndarray, weights: ad.Tensor | None = None) -> ad.Tensor:
    """Differentiable decomposed risk over a score tensor.

    ``positive`` is a boolean array marking I+.  The penalty term is
    supported for the identity g only; arbitrary g stays on the plain
    ``risk`` path.
    """
    positive = np.asarray(positive, dtype=bool).ravel()
    n = positive.shape[0]
    if scores.size != n:
        raise DimensionError("scores do not align with the positive mask")
    pos = ad.constant(positive.astype(np.float64).reshape(scores.shape))
    negm = ad.constant((~positive).astype(np.float64).reshape(scores.shape))
    if loss.kind == "xe2":
        plus_term = ad.softplus(ad.neg(scores))
        minus_term = ad.softplus(scores)
    elif loss.kind == "tanh-mse":
        t = ad.tanh(scores)
        plus_term = ad.square(1.0 - t)
        minus_term = ad.square(1.0 + t)
    elif loss.kind == "hinge":
        plus_term = ad.relu(1.0 - scores)
        minus_term = ad.relu(1.0 + scores)
    else:
        raise ConfigurationError(f"no differentiable form for {loss.kind!r}")
    out = (ad.tensor_sum(ad.mul(plus_term, pos))
           + ad.tensor_sum(ad.mul(minus_term, negm))) / float(n)
    if loss.lam > 0.0:
        if loss.g is not _identity:
            raise ConfigurationError(
                "the differentiable penalty supports the identity g only")
        if weights is None:
            raise ConfigurationError("lambda > 0 requires the weight tensor")
        out = out + ad.sqrt(ad.tensor_sum(ad.square(weights))) * loss.lam
    return out


def multiclass_xe(logits, labels) -> float:
    """Mean softmax cross-entropy of n-by-C logits against integer labels."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or logits.shape[1] < 2:
        raise DimensionError(f"expected n-by-C logits with C >= 2, got {logits.shape}")
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
    return float((lse - logits[np.arange(n), labels]).mean())


@dataclass
class MonotonicityReport:
    """Outcome of sweeping a loss quadruple over a sorted grid."""

    grid_points: int
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def monotonicity_audit(loss: DecomposableLoss, grid,
                       slack: float = 1e-12) -> MonotonicityReport:
    """Check ell_plus nonincreasing and ell_minus, g nondecreasing on
    consecutive grid pairs; violations are reported, never raised."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.shape[0] < 2 or np.any(np.diff(grid) < 0):
        raise ConfigurationError("grid must be a sorted list of >= 2 reals")
    report = MonotonicityReport(grid_points=grid.shape[0])
    plus = np.asarray(loss.ell_plus(grid), dtype=np.float64)
    minus = np.asarray(loss.ell_minus(grid), dtype=np.float64)
    gvals = np.asarray([loss.g(t) for t in grid], dtype=np.float64)
    for t1, t2, v1, v2 in zip(grid, grid[1:], plus, plus[1:]):
        if v1 < v2 - slack:
            report.violations.append(("ell_plus", float(t1), float(t2),
                                      float(v1), float(v2)))
    for t1, t2, v1, v2 in zip(grid, grid[1:], minus, minus[1:]):
        if v1 > v2 + slack:
            report.violations.append(("ell_minus", float(t1), float(t2),
                                      float(v1), float(v2)))
    for t1, t2, v1, v2 in zip(grid, grid[1:], gvals, gvals[1:]):
        if v1 > v2 + slack:
            report.violations.append(("g", float(t1), float(t2),
                                      float(v1), float(v2)))
    return report
