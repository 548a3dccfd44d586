"""Chi-square histogram kernels and their per-block weighted combination.

The block kernel is the exponential chi-square kernel
    k(x, y) = exp(-gamma * sum_i (x_i - y_i)^2 / (x_i + y_i))
with zero-mass bins contributing nothing. Full-image similarity is a convex
combination of the 72 per-block kernels, which keeps the combined kernel
positive semi-definite by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ModelError
from ..features.channels import BLOCK_COUNT, BodyFeatures

GAMMA_SAMPLE_PAIRS = 200  # pairs sampled by the bandwidth heuristic


@dataclass(frozen=True)
class KernelSpec:
    gamma: float
    block_weights: np.ndarray  # (72,) non-negative, summing to 1

    def __post_init__(self) -> None:
        w = self.block_weights
        if self.gamma <= 0 or not np.isfinite(self.gamma):
            raise ModelError("gamma must be a positive real")
        if w.shape != (BLOCK_COUNT,):
            raise ModelError(f"block_weights must have {BLOCK_COUNT} entries")
        if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
            raise ModelError("block_weights must be non-negative and sum to 1")


def uniform_weights() -> np.ndarray:
    return np.full(BLOCK_COUNT, 1.0 / BLOCK_COUNT)


def chi2_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Chi-square distance between two non-negative vectors."""
    if x.shape != y.shape:
        raise ModelError(f"histogram dimension mismatch: {x.shape} vs {y.shape}")
    if np.any(x < 0) or np.any(y < 0):
        raise ModelError("histograms must be non-negative")
    total = x + y
    diff2 = (x - y) ** 2
    terms = np.divide(diff2, total, out=np.zeros_like(diff2), where=total > 0)
    return float(terms.sum())


def chi2_block_kernel(x: np.ndarray, y: np.ndarray, gamma: float) -> float:
    """Exponential chi-square kernel between two histograms; in (0, 1]."""
    return float(np.exp(-gamma * chi2_distance(x, y)))


def block_matrices(features: Sequence[BodyFeatures]) -> list[np.ndarray]:
    """Stack a feature list into 72 matrices, one (n, dim_b) per block."""
    if not features:
        raise ModelError("empty feature list")
    return [
        np.stack([f.blocks[b].histogram for f in features]) for b in range(BLOCK_COUNT)
    ]


def chi2_cross_distance(x_mat: np.ndarray, y_mat: np.ndarray) -> np.ndarray:
    """Pairwise chi-square distances between the rows of two block matrices."""
    diff2 = (x_mat[:, None, :] - y_mat[None, :, :]) ** 2
    total = x_mat[:, None, :] + y_mat[None, :, :]
    terms = np.divide(diff2, total, out=np.zeros_like(diff2), where=total > 0)
    return terms.sum(axis=2)


def block_distance_matrices(
    x_blocks: list[np.ndarray], y_blocks: list[np.ndarray] | None = None
) -> list[np.ndarray]:
    y_blocks = x_blocks if y_blocks is None else y_blocks
    return [chi2_cross_distance(xb, yb) for xb, yb in zip(x_blocks, y_blocks)]


def combined_kernel(a: BodyFeatures, b: BodyFeatures, spec: KernelSpec) -> float:
    """Weighted sum over blocks of the per-block chi-square kernel."""
    value = 0.0
    for weight, block_a, block_b in zip(spec.block_weights, a.blocks, b.blocks):
        if weight > 0:
            value += float(weight) * chi2_block_kernel(
                block_a.histogram, block_b.histogram, spec.gamma
            )
    return value


def combined_gram(distances: list[np.ndarray], spec: KernelSpec) -> np.ndarray:
    """Weighted kernel matrix from precomputed per-block distance matrices."""
    gram = np.zeros_like(distances[0])
    for weight, dist in zip(spec.block_weights, distances):
        if weight > 0:
            gram += weight * np.exp(-spec.gamma * dist)
    return gram


def gram_matrix(features: Sequence[BodyFeatures], spec: KernelSpec) -> np.ndarray:
    """Symmetric kernel matrix G[i][j] = combined_kernel(i, j)."""
    return combined_gram(block_distance_matrices(block_matrices(features)), spec)


def auto_gamma(features: Sequence[BodyFeatures], rng: np.random.Generator) -> float:
    """Bandwidth heuristic: 1 / mean chi-square distance over sampled pairs.

    Averages per-block distances over up to GAMMA_SAMPLE_PAIRS distinct
    feature pairs; falls back to 1.0 when everything coincides.
    """
    n = len(features)
    if n < 2:
        return 1.0
    pairs = []
    seen = set()
    limit = min(GAMMA_SAMPLE_PAIRS, n * (n - 1) // 2)
    while len(pairs) < limit:
        i, j = int(rng.integers(n)), int(rng.integers(n))
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        if key in seen:
            continue
        seen.add(key)
        pairs.append(key)
    total = 0.0
    count = 0
    for i, j in pairs:
        for block_a, block_b in zip(features[i].blocks, features[j].blocks):
            total += chi2_distance(block_a.histogram, block_b.histogram)
            count += 1
    mean = total / count if count else 0.0
    return 1.0 / mean if mean > 1e-12 else 1.0
