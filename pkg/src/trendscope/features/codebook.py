"""Visual-word vocabulary for the gradient channel.

Dense 128-dimensional gradient-orientation descriptors (4x4 spatial cells x 8
orientation bins, trilinear binning, Gaussian window weighting) are sampled on
a 16-pixel stride and clustered with seeded k-means++ into the codebook.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from ..errors import FeatureError
from ..seeds import derive_rng

DESCRIPTOR_DIM = 128
WINDOW = 16          # descriptor support window, pixels
STRIDE = 16          # dense sampling stride, pixels
GRID = 4             # spatial cells per axis
ORI_BINS = 8
CLIP = 0.2           # per-entry clamp after the first L2 normalization

KMEANS_MAX_ITERS = 100
KMEANS_REL_TOL = 1e-4


def _spatial_weights() -> np.ndarray:
    """(WINDOW*WINDOW, GRID*GRID) bilinear cell weights with the Gaussian
    window factor folded in; precomputed once, shared by every descriptor."""
    cell = WINDOW / GRID
    sigma = WINDOW / 2.0
    center = (WINDOW - 1) / 2.0
    weights = np.zeros((WINDOW * WINDOW, GRID * GRID))
    for r in range(WINDOW):
        for c in range(WINDOW):
            g = np.exp(-((r - center) ** 2 + (c - center) ** 2) / (2.0 * sigma**2))
            u = (r + 0.5) / cell - 0.5
            v = (c + 0.5) / cell - 0.5
            u0, v0 = int(np.floor(u)), int(np.floor(v))
            fu, fv = u - u0, v - v0
            for du, wu in ((0, 1.0 - fu), (1, fu)):
                for dv, wv in ((0, 1.0 - fv), (1, fv)):
                    i, j = u0 + du, v0 + dv
                    if 0 <= i < GRID and 0 <= j < GRID and wu * wv > 0:
                        weights[r * WINDOW + c, i * GRID + j] = wu * wv * g
    return weights

_SPATIAL_W = _spatial_weights()


def dense_descriptors(gray: np.ndarray) -> np.ndarray:
    """Descriptors for every stride-aligned window fitting inside the array.

    Returns an (n, 128) float array; n is 0 when the array is smaller than
    the descriptor window.
    """
    h, w = gray.shape
    if h < WINDOW or w < WINDOW:
        return np.zeros((0, DESCRIPTOR_DIM))
    gy, gx = np.gradient(gray.astype(float))
    magnitude = np.hypot(gx, gy)
    orientation = np.mod(np.arctan2(gy, gx), 2.0 * np.pi)

    descriptors = []
    for y0 in range(0, h - WINDOW + 1, STRIDE):
        for x0 in range(0, w - WINDOW + 1, STRIDE):
            mag = magnitude[y0 : y0 + WINDOW, x0 : x0 + WINDOW].ravel()
            ori = orientation[y0 : y0 + WINDOW, x0 : x0 + WINDOW].ravel()
            ob = ori * (ORI_BINS / (2.0 * np.pi))
            b0 = np.floor(ob).astype(int) % ORI_BINS
            frac = ob - np.floor(ob)
            hist = np.zeros((WINDOW * WINDOW, ORI_BINS))
            rows = np.arange(WINDOW * WINDOW)
            np.add.at(hist, (rows, b0), (1.0 - frac) * mag)
            np.add.at(hist, (rows, (b0 + 1) % ORI_BINS), frac * mag)
            desc = (_SPATIAL_W.T @ hist).ravel()
            norm = np.linalg.norm(desc)
            if norm > 0:
                desc = np.minimum(desc / norm, CLIP)
                norm = np.linalg.norm(desc)
                if norm > 0:
                    desc = desc / norm
            descriptors.append(desc)
    return np.array(descriptors)


@dataclass(frozen=True)
class Codebook:
    centroids: np.ndarray  # (k, 128)
    trained_on: str        # corpus fingerprint
    seed: int = 0

    def __post_init__(self) -> None:
        c = self.centroids
        if c.ndim != 2 or c.shape[0] < 2 or c.shape[1] != DESCRIPTOR_DIM:
            raise FeatureError("codebook needs at least 2 centroids of dimension 128")
        if not np.all(np.isfinite(c)):
            raise FeatureError("codebook centroids must be finite")

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(f"{self.k}:{self.seed}:{self.trained_on}:".encode())
        digest.update(np.ascontiguousarray(self.centroids).tobytes())
        return digest.hexdigest()


def kmeans(
    points: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iters: int = KMEANS_MAX_ITERS,
    rel_tol: float = KMEANS_REL_TOL,
) -> np.ndarray:
    """Seeded k-means++ followed by Lloyd iterations.

    Stops after max_iters or when the relative inertia change drops below
    rel_tol. Empty clusters are re-seeded with the point farthest from its
    centroid (lowest index on ties), keeping the run deterministic.
    """
    if k < 2:
        raise FeatureError("k must be at least 2")
    if np.unique(points, axis=0).shape[0] < k:
        raise FeatureError(f"need at least {k} distinct points, got fewer")

    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[int(rng.integers(n))]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a centroid; take the first
            centroids[i] = points[int(np.argmax(d2))]
        else:
            target = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), target, side="right"))
            centroids[i] = points[min(idx, n - 1)]
        d2 = np.minimum(d2, ((points - centroids[i]) ** 2).sum(axis=1))

    prev_inertia = np.inf
    for _ in range(max_iters):
        dist = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(dist, axis=1)
        inertia = float(dist[np.arange(n), assign].sum())
        for i in range(k):
            members = points[assign == i]
            if members.shape[0] == 0:
                farthest = int(np.argmax(dist[np.arange(n), assign]))
                centroids[i] = points[farthest]
                assign[farthest] = i
            else:
                centroids[i] = members.mean(axis=0)
        if prev_inertia < np.inf and prev_inertia > 0:
            if abs(prev_inertia - inertia) / prev_inertia < rel_tol:
                break
        prev_inertia = inertia
    return centroids


def train_from_descriptors(
    descriptors: np.ndarray, k: int, seed: int, trained_on: str
) -> Codebook:
    if descriptors.shape[0] == 0:
        raise FeatureError("no descriptors to cluster; corpus images too small?")
    rng = derive_rng(seed, "codebook")
    return Codebook(centroids=kmeans(descriptors, k, rng), trained_on=trained_on, seed=seed)


def write_codebook(path: str, codebook: Codebook) -> None:
    doc = {
        "format": "trendscope.codebook",
        "version": 1,
        "k": codebook.k,
        "seed": codebook.seed,
        "trained_on": codebook.trained_on,
        "centroids": [[float(v) for v in row] for row in codebook.centroids],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def read_codebook(path: str) -> Codebook:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FeatureError(f"cannot read codebook {path}: {exc}") from exc
    if doc.get("format") != "trendscope.codebook" or doc.get("version") != 1:
        raise FeatureError(f"{path} is not a trendscope codebook (v1)")
    return Codebook(
        centroids=np.array(doc["centroids"], dtype=float),
        trained_on=doc["trained_on"],
        seed=doc["seed"],
    )
