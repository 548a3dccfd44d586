"""In-memory RGB image (8-bit, row-major) plus PNG/JPEG decode via Pillow."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import FeatureError
from ..ingest import PartRegion


@dataclass(frozen=True)
class Raster:
    """Decoded image: pixels is a (height, width, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise FeatureError("raster must be a (height, width, 3) uint8 array")
        if p.shape[0] == 0 or p.shape[1] == 0:
            raise FeatureError("raster must be non-empty")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def crop(self, region: PartRegion) -> np.ndarray:
        """Pixel view of a region; the region must lie within the raster."""
        if region.x + region.width > self.width or region.y + region.height > self.height:
            raise FeatureError(
                f"region {region.part} {region.rect} outside raster "
                f"{self.width}x{self.height}"
            )
        return self.pixels[
            region.y : region.y + region.height, region.x : region.x + region.width
        ]


def load_raster(path: str) -> Raster:
    """Decode a PNG or JPEG file to a Raster."""
    from PIL import Image

    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            return Raster(np.asarray(rgb, dtype=np.uint8))
    except OSError as exc:
        raise FeatureError(f"cannot decode image {path}: {exc}") from exc


def save_raster(raster: Raster, path: str) -> None:
    from PIL import Image

    Image.fromarray(raster.pixels, mode="RGB").save(path)
