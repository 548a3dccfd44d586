"""Per-part histogram channels and their mean/max patch pooling.

Every channel follows the same recipe: the region is tiled into 8x8-pixel
patches, each patch yields an L1-normalized histogram, and the patch
histograms are aggregated two ways (per-bin mean and per-bin max), each
L1-renormalized. A region too small to produce any patch histogram yields an
all-zero block flagged empty instead of an error.

Channel bin layouts (fixed):
  color    96 = HSV with 8 hue x 4 saturation x 3 value bins
  texture  59 = uniform LBP(8,1) codes (58 uniform patterns + 1 catch-all)
  sift     codebook size k: visual-word index of each dense descriptor
  skin     16 = skin-probability bins over [0, 1]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import FeatureError
from ..ingest import PARTS, PartRegion
from .codebook import Codebook, dense_descriptors
from .raster import Raster

CHANNELS = ("color", "texture", "sift", "skin")
AGGREGATIONS = ("mean_pool", "max_pool")
PATCH_SIZE = 8

COLOR_DIM = 96
TEXTURE_DIM = 59
SKIN_DIM = 16

HUE_BINS, SAT_BINS, VAL_BINS = 8, 4, 3

# Skin decision box in YCbCr (BT.601) with a linear ramp this many units wide
# outside each box edge.
SKIN_CB = (77.0, 127.0)
SKIN_CR = (133.0, 173.0)
SKIN_RAMP = 8.0

BLOCK_COUNT = len(PARTS) * len(CHANNELS) * len(AGGREGATIONS)


@dataclass(frozen=True)
class FeatureBlock:
    part: str
    channel: str
    aggregation: str
    histogram: np.ndarray
    empty: bool = False

    def __post_init__(self) -> None:
        h = self.histogram
        if h.ndim != 1:
            raise FeatureError("block histogram must be one-dimensional")
        fixed = {"color": COLOR_DIM, "texture": TEXTURE_DIM, "skin": SKIN_DIM}
        if self.channel in fixed and h.shape[0] != fixed[self.channel]:
            raise FeatureError(
                f"{self.channel} histogram must have {fixed[self.channel]} bins, "
                f"got {h.shape[0]}"
            )
        if np.any(h < 0) or not np.all(np.isfinite(h)):
            raise FeatureError("block histogram entries must be finite and non-negative")
        if self.empty:
            if np.any(h != 0):
                raise FeatureError("empty block must be all-zero")
        elif abs(float(h.sum()) - 1.0) > 1e-9:
            raise FeatureError("block histogram must be L1-normalized")


def block_index(part: str, channel: str, aggregation: str) -> int:
    """Position of a block in the canonical part-major ordering."""
    return (
        PARTS.index(part) * len(CHANNELS) * len(AGGREGATIONS)
        + CHANNELS.index(channel) * len(AGGREGATIONS)
        + AGGREGATIONS.index(aggregation)
    )


@dataclass(frozen=True)
class BodyFeatures:
    """All 72 blocks of one image in canonical order (part, channel, aggregation)."""

    blocks: tuple[FeatureBlock, ...]
    codebook_fingerprint: str | None = None

    def __post_init__(self) -> None:
        if len(self.blocks) != BLOCK_COUNT:
            raise FeatureError(f"expected {BLOCK_COUNT} blocks, got {len(self.blocks)}")
        for i, blk in enumerate(self.blocks):
            if block_index(blk.part, blk.channel, blk.aggregation) != i:
                raise FeatureError(
                    f"block {i} is ({blk.part}, {blk.channel}, {blk.aggregation}); "
                    "blocks must follow the canonical order without duplicates"
                )

    def block(self, part: str, channel: str, aggregation: str) -> FeatureBlock:
        return self.blocks[block_index(part, channel, aggregation)]


def _pool(patch_hists: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray, bool]:
    """Mean- and max-pool a (num_patches, dim) stack of normalized histograms.

    Returns (mean_pool, max_pool, empty). Pooling is order-invariant.
    """
    if patch_hists.shape[0] == 0:
        zero = np.zeros(dim)
        return zero, zero.copy(), True
    mean = patch_hists.mean(axis=0)
    mean = mean / mean.sum()
    mx = patch_hists.max(axis=0)
    mx = mx / mx.sum()
    return mean, mx, False


def _patch_histograms(
    rows: np.ndarray, cols: np.ndarray, bins: np.ndarray, shape: tuple[int, int], dim: int
) -> np.ndarray:
    """Histogram per 8x8 patch from per-pixel bin indices.

    rows/cols are pixel coordinates relative to the region origin; patches
    tile the region from its origin (edge patches may be partial).
    """
    patches_per_row = -(-shape[1] // PATCH_SIZE)  # ceil
    patch_id = (rows // PATCH_SIZE) * patches_per_row + (cols // PATCH_SIZE)
    n_patches = patches_per_row * (-(-shape[0] // PATCH_SIZE))
    counts = np.bincount(patch_id * dim + bins, minlength=n_patches * dim)
    hists = counts.reshape(n_patches, dim).astype(float)
    totals = hists.sum(axis=1)
    occupied = totals > 0
    hists = hists[occupied]
    hists /= totals[occupied, None]
    return hists


def _rgb_to_hsv(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized RGB [0,255] -> (h in [0,1), s in [0,1], v in [0,1])."""
    arr = rgb.astype(float) / 255.0
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    maxc = arr.max(axis=-1)
    minc = arr.min(axis=-1)
    v = maxc
    span = maxc - minc
    s = np.where(maxc > 0, span / np.where(maxc > 0, maxc, 1.0), 0.0)
    safe = np.where(span > 0, span, 1.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(span > 0, (h / 6.0) % 1.0, 0.0)
    return h, s, v


def _hsv_bins(rgb: np.ndarray) -> np.ndarray:
    h, s, v = _rgb_to_hsv(rgb)
    hi = np.minimum((h * HUE_BINS).astype(int), HUE_BINS - 1)
    si = np.minimum((s * SAT_BINS).astype(int), SAT_BINS - 1)
    vi = np.minimum((v * VAL_BINS).astype(int), VAL_BINS - 1)
    return hi * (SAT_BINS * VAL_BINS) + si * VAL_BINS + vi


def extract_color(raster: Raster, region: PartRegion) -> tuple[np.ndarray, np.ndarray]:
    """HSV histogram pair (mean_pool, max_pool) for one region."""
    patch = raster.crop(region)
    h, w = patch.shape[:2]
    bins = _hsv_bins(patch.reshape(-1, 3))
    rows, cols = np.divmod(np.arange(h * w), w)
    hists = _patch_histograms(rows, cols, bins, (h, w), COLOR_DIM)
    mean, mx, _ = _pool(hists, COLOR_DIM)
    return mean, mx


def luma(rgb: np.ndarray) -> np.ndarray:
    """BT.601 grayscale."""
    arr = rgb.astype(float)
    return 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]


def _build_uniform_lut() -> np.ndarray:
    """Map each 8-bit LBP code to its uniform-pattern bin.

    A code is uniform when its circular bit string has at most two 0/1
    transitions; the 58 uniform codes are binned in ascending numeric order
    and all others share bin 58.
    """
    lut = np.full(256, TEXTURE_DIM - 1, dtype=np.intp)
    uniform = []
    for code in range(256):
        bits = [(code >> k) & 1 for k in range(8)]
        transitions = sum(bits[k] != bits[(k + 1) % 8] for k in range(8))
        if transitions <= 2:
            uniform.append(code)
    for idx, code in enumerate(uniform):
        lut[code] = idx
    return lut

_UNIFORM_LUT = _build_uniform_lut()

# Neighbor offsets (dy, dx) for LBP bits 0..7: counterclockwise from east.
_LBP_OFFSETS = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))


def lbp_codes(gray: np.ndarray) -> np.ndarray:
    """Uniform-LBP bin index for each interior pixel of a grayscale array.

    Bit k is set when the k-th neighbor is strictly brighter than the center,
    so a constant patch maps every pixel to the all-zeros pattern (bin 0).
    Returns an (h-2, w-2) array; empty when the input is smaller than 3x3.
    """
    h, w = gray.shape
    if h < 3 or w < 3:
        return np.zeros((0, 0), dtype=np.intp)
    center = gray[1 : h - 1, 1 : w - 1]
    codes = np.zeros(center.shape, dtype=np.intp)
    for k, (dy, dx) in enumerate(_LBP_OFFSETS):
        neighbor = gray[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
        codes |= (neighbor > center).astype(np.intp) << k
    return _UNIFORM_LUT[codes]


def extract_texture(raster: Raster, region: PartRegion) -> tuple[np.ndarray, np.ndarray]:
    """Uniform-LBP histogram pair for one region.

    Codes are computed per interior pixel of the region; a region smaller
    than 3x3 yields flagged all-zero histograms.
    """
    patch = raster.crop(region)
    gray = luma(patch)
    bins = lbp_codes(gray)
    if bins.size == 0:
        zero = np.zeros(TEXTURE_DIM)
        return zero, zero.copy()
    ih, iw = bins.shape
    # interior pixel (r, c) sits at region-relative (r+1, c+1)
    rows, cols = np.divmod(np.arange(ih * iw), iw)
    hists = _patch_histograms(rows + 1, cols + 1, bins.ravel(), gray.shape, TEXTURE_DIM)
    mean, mx, _ = _pool(hists, TEXTURE_DIM)
    return mean, mx


def _ramp(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    rising = (values - (lo - SKIN_RAMP)) / SKIN_RAMP
    falling = ((hi + SKIN_RAMP) - values) / SKIN_RAMP
    return np.clip(np.minimum(rising, falling), 0.0, 1.0)


def skin_probability(rgb: np.ndarray) -> np.ndarray:
    """Per-pixel skin probability from the fixed YCbCr chroma box."""
    arr = rgb.astype(float)
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    return _ramp(cb, *SKIN_CB) * _ramp(cr, *SKIN_CR)


def extract_skin(raster: Raster, region: PartRegion) -> tuple[np.ndarray, np.ndarray]:
    """Skin-probability histogram pair for one region (16 bins over [0,1])."""
    patch = raster.crop(region)
    h, w = patch.shape[:2]
    prob = skin_probability(patch.reshape(-1, 3))
    bins = np.minimum((prob * SKIN_DIM).astype(int), SKIN_DIM - 1)
    rows, cols = np.divmod(np.arange(h * w), w)
    hists = _patch_histograms(rows, cols, bins, (h, w), SKIN_DIM)
    mean, mx, _ = _pool(hists, SKIN_DIM)
    return mean, mx


def extract_sift(
    raster: Raster, region: PartRegion, codebook: Codebook
) -> tuple[np.ndarray, np.ndarray]:
    """Visual-word histogram pair for one region.

    Each dense descriptor window acts as one patch: its histogram is the
    one-hot vector of the nearest centroid (Euclidean, ties to the lowest
    index). Regions too small for a descriptor window yield flagged zeros.
    """
    patch = raster.crop(region)
    gray = luma(patch)
    descriptors = dense_descriptors(gray)
    k = codebook.k
    if descriptors.shape[0] == 0:
        zero = np.zeros(k)
        return zero, zero.copy()
    d2 = ((descriptors[:, None, :] - codebook.centroids[None, :, :]) ** 2).sum(axis=2)
    words = np.argmin(d2, axis=1)
    hists = np.zeros((descriptors.shape[0], k))
    hists[np.arange(descriptors.shape[0]), words] = 1.0
    mean, mx, _ = _pool(hists, k)
    return mean, mx


def extract_all(
    raster: Raster, regions: tuple[PartRegion, ...], codebook: Codebook
) -> BodyFeatures:
    """All 72 blocks for one image, canonical order, deterministic."""
    if tuple(r.part for r in regions) != PARTS:
        raise FeatureError("expected the nine canonical part regions in order")
    extractors = {
        "color": lambda reg: extract_color(raster, reg),
        "texture": lambda reg: extract_texture(raster, reg),
        "sift": lambda reg: extract_sift(raster, reg, codebook),
        "skin": lambda reg: extract_skin(raster, reg),
    }
    blocks: list[FeatureBlock] = []
    for region in regions:
        for channel in CHANNELS:
            try:
                mean, mx = extractors[channel](region)
            except FeatureError as exc:
                raise FeatureError(f"{region.part}/{channel}: {exc}") from exc
            for aggregation, hist in zip(AGGREGATIONS, (mean, mx)):
                empty = not np.any(hist)
                blocks.append(FeatureBlock(region.part, channel, aggregation, hist, empty))
    return BodyFeatures(blocks=tuple(blocks), codebook_fingerprint=codebook.fingerprint())
