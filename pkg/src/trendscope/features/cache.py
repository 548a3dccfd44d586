"""Feature cache file: one JSONL record per image, preceded by a versioned
header carrying the codebook fingerprint. A cache written against a different
codebook is rejected at read time when the expected fingerprint is known."""

from __future__ import annotations

import json
from typing import Iterable

import numpy as np

from ..errors import FeatureError
from .channels import BodyFeatures, FeatureBlock

FORMAT = "trendscope.features"
VERSION = 1


def _block_record(block: FeatureBlock) -> list:
    return [
        block.part,
        block.channel,
        block.aggregation,
        int(block.histogram.shape[0]),
        bool(block.empty),
        [float(v) for v in block.histogram],
    ]


def write_feature_cache(
    path: str, entries: Iterable[tuple[str, BodyFeatures]], codebook_fingerprint: str
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": FORMAT, "version": VERSION, "codebook_fingerprint": codebook_fingerprint}
        fh.write(json.dumps(header) + "\n")
        for image_id, features in entries:
            record = {"id": image_id, "blocks": [_block_record(b) for b in features.blocks]}
            fh.write(json.dumps(record) + "\n")


def read_feature_cache(
    path: str, expected_fingerprint: str | None = None
) -> tuple[dict[str, BodyFeatures], str]:
    """Load a cache as {image id: BodyFeatures} plus its codebook fingerprint."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise FeatureError(f"cannot read feature cache {path}: {exc}") from exc
    if not lines:
        raise FeatureError(f"feature cache {path} is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FeatureError(f"{path}: invalid header ({exc})") from exc
    if header.get("format") != FORMAT or header.get("version") != VERSION:
        raise FeatureError(f"{path} is not a trendscope feature cache (v{VERSION})")
    fingerprint = header.get("codebook_fingerprint")
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        raise FeatureError(
            f"{path}: cache was built with codebook {fingerprint}, expected "
            f"{expected_fingerprint}; re-run extraction"
        )
    result: dict[str, BodyFeatures] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FeatureError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        blocks = tuple(
            FeatureBlock(part, channel, agg, np.array(values, dtype=float), empty)
            for part, channel, agg, _dim, empty, values in record["blocks"]
        )
        image_id = record["id"]
        if image_id in result:
            raise FeatureError(f"{path}:{lineno}: duplicate image id {image_id!r}")
        result[image_id] = BodyFeatures(blocks=blocks, codebook_fingerprint=fingerprint)
    return result, fingerprint
