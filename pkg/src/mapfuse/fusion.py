"""Closed-form Bayesian fusion of probabilistic classifications.

Each pixel carries a Dirichlet prior over class proportions. Treating
investigator probability vectors as weighted fractional observations,
conjugacy gives the posterior concentration in closed form:

    alpha_post[i, c] = alpha[c] + sum_j w[j] * p[j, i, c]

and the posterior mean estimate of the class proportions

    theta_hat[i, c] = alpha_post[i, c] / (alpha_0 + W)

with alpha_0 = sum_c alpha[c] and W = sum_j w[j]. No sampling or
iteration is involved; fusing any number of maps is a single weighted
sum over the stack.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import GridShape, LabelRaster, ProbabilityRaster, _freeze, hard_classify

DEFAULT_EPSILON = 1e-10


@dataclass(frozen=True)
class FusionConfig:
    """Prior and numeric settings for a fusion run.

    prior_alpha is a single symmetric concentration applied to every
    class; 1.0 is the flat (uniform) prior used throughout.
    """

    prior_alpha: float = 1.0
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not (self.prior_alpha > 0 and np.isfinite(self.prior_alpha)):
            raise ValueError(f"prior_alpha must be positive, got {self.prior_alpha}")
        if not (0 < self.epsilon < 1e-3):
            raise ValueError(f"epsilon must be in (0, 1e-3), got {self.epsilon}")


@dataclass(frozen=True)
class PosteriorField:
    """Fusion output: per-pixel posterior concentrations and their mean."""

    shape: GridShape
    alpha: np.ndarray          # (H, W, C) posterior concentration
    mean: ProbabilityRaster    # posterior mean, a proper probability raster
    weights: np.ndarray        # (J,) weights actually applied

    def __post_init__(self):
        object.__setattr__(self, "alpha", _freeze(np.asarray(self.alpha, dtype=np.float64)))
        object.__setattr__(self, "weights", _freeze(np.asarray(self.weights, dtype=np.float64)))

    @property
    def strength(self) -> float:
        """Total posterior concentration alpha_0 + W (same at every pixel)."""
        return float(self.alpha[0, 0].sum())


def regularize(values: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Replace zero components by epsilon and renormalize each pixel.

    Keeps probability vectors strictly interior to the simplex so that
    log-density evaluation and zero-count conjugate updates stay finite.
    Vectors without zeros pass through up to renormalization.
    """
    values = np.asarray(values, dtype=np.float64)
    if (values < 0).any():
        raise ValueError("negative probability")
    out = np.where(values == 0.0, epsilon, values)
    return out / out.sum(axis=-1, keepdims=True)


def _stack(maps) -> np.ndarray:
    if len(maps) == 0:
        raise ValueError("need at least one probability raster to fuse")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise ValueError(f"shape mismatch: {m.shape} != {shape}")
    return np.stack([m.values for m in maps])  # (J, H, W, C)


def fuse(maps, weights=None, config: FusionConfig | None = None) -> PosteriorField:
    """Fuse probability rasters into a posterior field.

    weights : per-map positive weights, one per raster; defaults to all
    ones (each map counts as a single observation).
    """
    config = config or FusionConfig()
    stack = _stack(maps)
    n_maps = stack.shape[0]
    if weights is None:
        w = np.ones(n_maps)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (n_maps,):
            raise ValueError(f"expected {n_maps} weights, got shape {w.shape}")
        if not np.isfinite(w).all() or (w <= 0).any():
            raise ValueError("weights must be positive and finite")

    shape = maps[0].shape
    evidence = np.einsum("j,jhwc->hwc", w, stack)
    alpha_post = config.prior_alpha + evidence
    strength = config.prior_alpha * shape.n_classes + w.sum()
    mean = ProbabilityRaster(shape, alpha_post / strength)
    return PosteriorField(shape=shape, alpha=alpha_post, mean=mean, weights=w)


def fused_label_map(posterior: PosteriorField) -> LabelRaster:
    """Hard consensus map: per-pixel argmax of the posterior mean."""
    return hard_classify(posterior.mean)
