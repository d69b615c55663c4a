"""Feature maps, their induced kernels, kernel bounds, and RKHS distances.

A feature map here is an elementwise nonlinearity optionally followed by
unit normalization.  Its kernel is always evaluated through the explicit
features (an inner product of feature vectors), never through a
center-based expansion, which keeps evaluation linear in sample size.

All operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError, DimensionError

_SCALAR_FUNCS = {
    "relu": lambda u: np.maximum(u, 0.0),
    "tanh": np.tanh,
    "sigmoid": lambda u: ad._sigmoid(np.asarray(u, dtype=np.float64)),
}

# (sup k, inf k) for the unit-normalized feature map of each nonlinearity.
_KERNEL_BOUNDS = {
    "relu": (1.0, 0.0),
    "tanh": (1.0, -1.0),
    "sigmoid": (1.0, 0.0),
}


def kernel_bounds(nonlinearity: str) -> tuple[float, float]:
    """Supremum and infimum of the induced kernel, assuming normalization.

    The infimum 0 for relu and sigmoid is an infimum only: sigmoid features
    are strictly positive, so exactly orthogonal pairs are unreachable.
    """
    try:
        return _KERNEL_BOUNDS[nonlinearity]
    except KeyError:
        raise ConfigurationError(
            f"unsupported nonlinearity: {nonlinearity!r}") from None


@dataclass(frozen=True)
class FeatureMap:
    """Elementwise nonlinearity plus optional row-wise unit normalization."""

    nonlinearity: str = "tanh"
    normalize: bool = True
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.nonlinearity not in _SCALAR_FUNCS:
            raise ConfigurationError(
                f"unsupported nonlinearity: {self.nonlinearity!r}")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")

    def apply(self, U) -> np.ndarray:
        """Map a batch (n-by-d) or a single vector into feature space."""
        U = np.asarray(U, dtype=np.float64)
        single = U.ndim == 1
        rows = U.reshape(1, -1) if single else U
        feats = _SCALAR_FUNCS[self.nonlinearity](rows)
        if self.normalize:
            norms = np.linalg.norm(feats, axis=1, keepdims=True)
            feats = feats / np.maximum(norms, self.epsilon)
        return feats[0] if single else feats

    def apply_tensor(self, x: ad.Tensor) -> ad.Tensor:
        """Differentiable version of ``apply`` for n-by-d activations."""
        feats = ad.elementwise(x, self.nonlinearity)
        if self.normalize:
            feats = ad.unit_normalize(feats, self.epsilon)
        return feats

    def bounds(self) -> tuple[float, float]:
        if not self.normalize:
            raise ConfigurationError(
                "kernel bounds are only declared for normalized feature maps")
        return kernel_bounds(self.nonlinearity)


@dataclass(frozen=True)
class KernelSpec:
    """A feature map together with the sup/inf of its kernel."""

    feature_map: FeatureMap
    alpha: float
    beta: float

    def __post_init__(self):
        if self.beta > self.alpha:
            raise ConfigurationError("beta must not exceed alpha")

    @classmethod
    def for_nonlinearity(cls, nonlinearity: str,
                         epsilon: float = 1e-12) -> "KernelSpec":
        alpha, beta = kernel_bounds(nonlinearity)
        fmap = FeatureMap(nonlinearity=nonlinearity, normalize=True,
                          epsilon=epsilon)
        return cls(feature_map=fmap, alpha=alpha, beta=beta)


def kernel_eval(spec: KernelSpec, u, v) -> float:
    """Inner product of the two feature vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DimensionError(f"kernel_eval: {u.shape} vs {v.shape}")
    return float(spec.feature_map.apply(u) @ spec.feature_map.apply(v))


def kernel_matrix(spec: KernelSpec, X) -> np.ndarray:
    """Symmetric n-by-n matrix of pairwise kernel values over a batch."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DimensionError(f"kernel_matrix expects n-by-d batch, got {X.shape}")
    feats = spec.feature_map.apply(X)
    K = feats @ feats.T
    # Mirror the upper triangle so the result is exactly symmetric.
    upper = np.triu(K)
    return upper + np.triu(K, 1).T


def rkhs_distance_sq(spec: KernelSpec, u, v) -> float:
    """Squared feature-space distance, k(u,u) + k(v,v) - 2 k(u,v)."""
    return (kernel_eval(spec, u, u) + kernel_eval(spec, v, v)
            - 2.0 * kernel_eval(spec, u, v))


@dataclass(frozen=True)
class ConvPatchSpec:
    """A receptive-field extraction: patch size, center, and padding rule.

    ``padding="none"`` rejects centers whose patch leaves the input;
    ``padding="zero"`` reads zeros outside it.  The extracted vector
    concatenates the per-channel row-major h-by-w patches, channel 0 first.
    """

    height: int
    width: int
    channels: int
    center_row: int
    center_col: int
    padding: str = "none"

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.channels < 1:
            raise ConfigurationError("patch dimensions must be positive")
        if self.padding not in ("none", "zero"):
            raise ConfigurationError(f"unknown padding rule: {self.padding!r}")


def conv_patch_feature(spec: KernelSpec, X, patch: ConvPatchSpec) -> np.ndarray:
    """Feature vector of one receptive field of an H-by-W-by-C activation.

    Applies the nonlinearity entrywise (no normalization: the receptive
    field is a restriction of the elementwise map), then extracts the
    h-by-w window centered at (center_row, center_col) from every channel.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise DimensionError(f"expected H-by-W-by-C tensor, got {X.shape}")
    H, W, C = X.shape
    if C != patch.channels:
        raise DimensionError(
            f"patch expects {patch.channels} channels, tensor has {C}")
    r0 = patch.center_row - patch.height // 2
    c0 = patch.center_col - patch.width // 2
    r1, c1 = r0 + patch.height, c0 + patch.width
    phi = _SCALAR_FUNCS[spec.feature_map.nonlinearity](X)
    if patch.padding == "none":
        if r0 < 0 or c0 < 0 or r1 > H or c1 > W:
            raise DimensionError(
                f"patch [{r0}:{r1}, {c0}:{c1}] leaves the {H}x{W} input "
                "under the no-padding rule")
        window = phi[r0:r1, c0:c1, :]
    else:
        window = np.zeros((patch.height, patch.width, C))
        rs, cs = max(r0, 0), max(c0, 0)
        re, ce = min(r1, H), min(c1, W)
        if rs < re and cs < ce:
            window[rs - r0:re - r0, cs - c0:ce - c0, :] = phi[rs:re, cs:ce, :]
    return np.concatenate([window[:, :, c].ravel() for c in range(C)])


def gram_tensor(feature_map: FeatureMap, activations: ad.Tensor) -> ad.Tensor:
    """Differentiable kernel matrix of a batch of pre-feature activations."""
    feats = feature_map.apply_tensor(activations)
    return ad.matmul(feats, ad.transpose(feats))
