"""Shared fixture builders and independent reference implementations used as
oracles by the test suite. Everything here is deliberately written with plain
loops, separate from the library's vectorized paths."""

from __future__ import annotations

import itertools

import numpy as np

from trendscope.features.channels import (
    AGGREGATIONS,
    CHANNELS,
    COLOR_DIM,
    SKIN_DIM,
    TEXTURE_DIM,
    BodyFeatures,
    FeatureBlock,
)
from trendscope.ingest import PARTS

CHANNEL_DIMS = {"color": COLOR_DIM, "texture": TEXTURE_DIM, "skin": SKIN_DIM}


def random_histogram(rng: np.random.Generator, dim: int) -> np.ndarray:
    h = rng.random(dim)
    return h / h.sum()


def random_features(
    rng: np.random.Generator, k: int = 8, fingerprint: str | None = None
) -> BodyFeatures:
    """A valid random BodyFeatures value (sift blocks use codebook size k)."""
    blocks = []
    for part in PARTS:
        for channel in CHANNELS:
            dim = CHANNEL_DIMS.get(channel, k)
            for agg in AGGREGATIONS:
                blocks.append(FeatureBlock(part, channel, agg, random_histogram(rng, dim)))
    return BodyFeatures(blocks=tuple(blocks), codebook_fingerprint=fingerprint)


def replace_block(features: BodyFeatures, index: int, histogram: np.ndarray) -> BodyFeatures:
    old = features.blocks[index]
    blocks = list(features.blocks)
    blocks[index] = FeatureBlock(old.part, old.channel, old.aggregation, histogram)
    return BodyFeatures(blocks=tuple(blocks), codebook_fingerprint=features.codebook_fingerprint)


# ---------------------------------------------------------------------------
# independent LBP reference (plain loops, strict > comparison, east-first
# counterclockwise bit order; uniform codes binned in ascending order)


def reference_lbp_histograms(gray: np.ndarray, patch: int = 8) -> list[np.ndarray]:
    uniform_codes = []
    for code in range(256):
        bits = [(code >> k) & 1 for k in range(8)]
        if sum(bits[k] != bits[(k + 1) % 8] for k in range(8)) <= 2:
            uniform_codes.append(code)
    bin_of = {code: i for i, code in enumerate(uniform_codes)}
    offsets = [(0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1)]
    h, w = gray.shape
    per_patch: dict[tuple[int, int], np.ndarray] = {}
    for r in range(1, h - 1):
        for c in range(1, w - 1):
            code = 0
            for k, (dy, dx) in enumerate(offsets):
                if gray[r + dy, c + dx] > gray[r, c]:
                    code |= 1 << k
            b = bin_of.get(code, TEXTURE_DIM - 1)
            key = (r // patch, c // patch)
            per_patch.setdefault(key, np.zeros(TEXTURE_DIM))
            per_patch[key][b] += 1
    return [hist / hist.sum() for _, hist in sorted(per_patch.items())]


def reference_pool(hists: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    stack = np.stack(hists)
    mean = stack.mean(axis=0)
    mx = stack.max(axis=0)
    return mean / mean.sum(), mx / mx.sum()


# ---------------------------------------------------------------------------
# exhaustive active-set QP reference for the SVM dual


def qp_reference(gram: np.ndarray, labels: np.ndarray, c: np.ndarray) -> float:
    """Globally optimal dual objective by enumerating every bound pattern.

    Each coordinate is pinned at 0, pinned at C, or left free; the free block
    is solved through the stationarity system with the equality-constraint
    multiplier, and the best feasible objective over all patterns is returned.
    """
    y = np.asarray(labels, dtype=float)
    n = y.shape[0]
    q = np.outer(y, y) * gram

    def objective(alpha: np.ndarray) -> float:
        return float(alpha.sum() - 0.5 * alpha @ q @ alpha)

    best = -np.inf
    for pattern in itertools.product((0, 1, 2), repeat=n):
        alpha = np.zeros(n)
        free = [i for i, p in enumerate(pattern) if p == 2]
        for i, p in enumerate(pattern):
            if p == 1:
                alpha[i] = c[i]
        if not free:
            if abs(y @ alpha) < 1e-9:
                best = max(best, objective(alpha))
            continue
        f = np.array(free)
        bound_mask = np.ones(n, dtype=bool)
        bound_mask[f] = False
        target = -float(y[bound_mask] @ alpha[bound_mask])
        m = len(free)
        system = np.zeros((m + 1, m + 1))
        system[:m, :m] = q[np.ix_(f, f)]
        system[:m, m] = y[f]
        system[m, :m] = y[f]
        rhs = np.zeros(m + 1)
        rhs[:m] = 1.0 - q[np.ix_(f, bound_mask)] @ alpha[bound_mask]
        rhs[m] = target
        solution, *_ = np.linalg.lstsq(system, rhs, rcond=None)
        if np.linalg.norm(system @ solution - rhs) > 1e-8:
            continue  # inconsistent: no stationary point on this face
        alpha_f = solution[:m]
        if np.any(alpha_f < -1e-9) or np.any(alpha_f > c[f] + 1e-9):
            continue
        alpha[f] = np.clip(alpha_f, 0.0, c[f])
        best = max(best, objective(alpha))
    return best


def kkt_violation(
    gram: np.ndarray, labels: np.ndarray, c: np.ndarray, dual: np.ndarray, bias: float
) -> float:
    """Largest violation of the stationarity conditions at a dual solution."""
    y = np.asarray(labels, dtype=float)
    alpha = dual * y
    margins = gram @ dual + bias
    worst = 0.0
    for i in range(y.shape[0]):
        ym = y[i] * margins[i]
        if alpha[i] <= 1e-9:
            worst = max(worst, 1.0 - ym)  # should have margin >= 1
        elif alpha[i] >= c[i] - 1e-9:
            worst = max(worst, ym - 1.0)  # should have margin <= 1
        else:
            worst = max(worst, abs(ym - 1.0))
    return worst


# ---------------------------------------------------------------------------
# sigmoid-calibration grid oracle


def platt_grid_oracle(
    margins: np.ndarray,
    labels: np.ndarray,
    a_grid: np.ndarray,
    b_grid: np.ndarray,
) -> tuple[float, float]:
    """Minimize the smoothed-target NLL over an explicit (A, B) grid."""
    y = np.asarray(labels, dtype=float)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == -1))
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    best = (np.inf, 0.0, 0.0)
    for a in a_grid:
        z = a * margins
        for b in b_grid:
            zz = z + b
            nll = float(np.sum((t - 1.0) * zz + np.maximum(zz, 0) + np.log1p(np.exp(-np.abs(zz)))))
            if nll < best[0]:
                best = (nll, float(a), float(b))
    return best[1], best[2]
