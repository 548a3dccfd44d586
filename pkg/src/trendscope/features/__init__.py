"""Image feature extraction: 72 histogram blocks per image
(9 body parts x 4 channels x 2 aggregations)."""

from .cache import read_feature_cache, write_feature_cache
from .channels import (
    AGGREGATIONS,
    BLOCK_COUNT,
    CHANNELS,
    PATCH_SIZE,
    BodyFeatures,
    FeatureBlock,
    block_index,
    extract_all,
    extract_color,
    extract_sift,
    extract_skin,
    extract_texture,
    lbp_codes,
    skin_probability,
)
from .codebook import (
    Codebook,
    dense_descriptors,
    kmeans,
    read_codebook,
    train_from_descriptors,
    write_codebook,
)
from .raster import Raster, load_raster, save_raster

__all__ = [
    "AGGREGATIONS",
    "BLOCK_COUNT",
    "CHANNELS",
    "PATCH_SIZE",
    "BodyFeatures",
    "Codebook",
    "FeatureBlock",
    "Raster",
    "block_index",
    "dense_descriptors",
    "extract_all",
    "extract_color",
    "extract_sift",
    "extract_skin",
    "extract_texture",
    "kmeans",
    "lbp_codes",
    "load_raster",
    "read_codebook",
    "read_feature_cache",
    "save_raster",
    "skin_probability",
    "train_from_descriptors",
    "write_codebook",
    "write_feature_cache",
]
