"""Corpus ingestion: manifests of annotated images, per-(source, year) counts,
and the fixed-grid fallback segmentation used when pose annotations are absent.

Manifest format: UTF-8 JSON Lines, one image record per line. Fields:
  id       unique string (required)
  path     image file path, relative paths resolved against the manifest dir (required)
  source   "fashion_show" | "street_chic" (required)
  year     integer (required)
  month    integer 1..12 (optional)
  regions  nine [x, y, width, height] boxes ordered by PARTS (optional; when
           absent the fixed grid is applied, which requires a readable image)
  labels   {attribute_id: 0|1} (optional)
Unknown fields are rejected.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

from .errors import ManifestError
from .schema import AttributeSchema

PARTS = (
    "torso",
    "upper_left_arm",
    "upper_right_arm",
    "lower_left_arm",
    "lower_right_arm",
    "upper_left_leg",
    "upper_right_leg",
    "lower_left_leg",
    "lower_right_leg",
)

SOURCES = ("fashion_show", "street_chic")

_RECORD_FIELDS = {"id", "path", "source", "year", "month", "regions", "labels"}

# Fixed-grid fractions (of image width/height). The torso occupies the central
# band, arms flank it, legs take the bottom half; regions tile the body band.
GRID_TORSO_X = (3, 10), (7, 10)   # central 40% of width
GRID_BAND_Y = (1, 10), (5, 10)    # torso/arm band: rows 10%..50%
GRID_ARM_SPLIT_Y = (3, 10)        # upper/lower arm boundary at 30% height
GRID_LEG_SPLIT_Y = (3, 4)         # upper/lower leg boundary at 75% height


@dataclass(frozen=True)
class PartRegion:
    part: str
    x: int
    y: int
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.part not in PARTS:
            raise ManifestError(f"unknown body part {self.part!r}")
        if self.width <= 0 or self.height <= 0:
            raise ManifestError(f"region for {self.part} must have positive size")
        if self.x < 0 or self.y < 0:
            raise ManifestError(f"region for {self.part} has negative origin")

    @property
    def rect(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.width, self.height)


@dataclass(frozen=True)
class ImageRecord:
    id: str
    path: str
    source: str
    year: int
    regions: tuple[PartRegion, ...]
    month: int | None = None
    labels: dict[str, int] | None = None
    grid_fallback: bool = False  # True when regions came from default_part_regions

    def __post_init__(self) -> None:
        if len(self.regions) != len(PARTS) or tuple(r.part for r in self.regions) != PARTS:
            raise ManifestError(
                f"record {self.id!r}: expected all nine parts exactly once in canonical order"
            )


@dataclass(frozen=True)
class Corpus:
    records: tuple[ImageRecord, ...]
    schema_version: str
    fallback_count: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def fingerprint(self) -> str:
        """Stable content identity used to tag codebooks and models.

        Hashes ids, tags, and regions (not filesystem paths) so the same
        corpus produces the same fingerprint from any directory.
        """
        payload = [
            [r.id, r.source, r.year, r.month, [list(p.rect) for p in r.regions]]
            for r in sorted(self.records, key=lambda r: r.id)
        ]
        blob = json.dumps(payload, separators=(",", ":")).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def default_part_regions(width: int, height: int) -> tuple[PartRegion, ...]:
    """Deterministic fixed-grid segmentation of a width x height image.

    Boundaries use integer arithmetic on the documented grid fractions, so
    regions scale exactly linearly whenever the dimensions are multiples of
    20. Degenerate bands are clamped to at least one pixel inside the image.
    """
    if width <= 0 or height <= 0:
        raise ManifestError("image dimensions must be positive")

    def frac(num_den: tuple[int, int], dim: int) -> int:
        num, den = num_den
        return (num * dim) // den

    x_left, x_right = frac(GRID_TORSO_X[0], width), frac(GRID_TORSO_X[1], width)
    y_top, y_bottom = frac(GRID_BAND_Y[0], height), frac(GRID_BAND_Y[1], height)
    y_arm = frac(GRID_ARM_SPLIT_Y, height)
    y_leg = frac(GRID_LEG_SPLIT_Y, height)
    x_mid = width // 2

    def clamped(part: str, x0: int, y0: int, x1: int, y1: int) -> PartRegion:
        x0 = min(max(x0, 0), width - 1)
        y0 = min(max(y0, 0), height - 1)
        w = max(x1 - x0, 1)
        h = max(y1 - y0, 1)
        w = min(w, width - x0)
        h = min(h, height - y0)
        return PartRegion(part, x0, y0, w, h)

    return (
        clamped("torso", x_left, y_top, x_right, y_bottom),
        clamped("upper_left_arm", 0, y_top, x_left, y_arm),
        clamped("upper_right_arm", x_right, y_top, width, y_arm),
        clamped("lower_left_arm", 0, y_arm, x_left, y_bottom),
        clamped("lower_right_arm", x_right, y_arm, width, y_bottom),
        clamped("upper_left_leg", 0, y_bottom, x_mid, y_leg),
        clamped("upper_right_leg", x_mid, y_bottom, width, y_leg),
        clamped("lower_left_leg", 0, y_leg, x_mid, height),
        clamped("lower_right_leg", x_mid, y_leg, width, height),
    )


def _parse_regions(raw: object, record_id: str) -> tuple[PartRegion, ...]:
    if not isinstance(raw, list) or len(raw) != len(PARTS):
        raise ManifestError(f"record {record_id!r}: regions must list nine [x,y,w,h] boxes")
    regions = []
    for part, box in zip(PARTS, raw):
        if (
            not isinstance(box, list)
            or len(box) != 4
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in box)
        ):
            raise ManifestError(f"record {record_id!r}: region for {part} must be four integers")
        regions.append(PartRegion(part, *box))
    return tuple(regions)


def _parse_labels(raw: object, record_id: str, schema: AttributeSchema) -> dict[str, int]:
    if not isinstance(raw, dict):
        raise ManifestError(f"record {record_id!r}: labels must be a mapping")
    known = set(schema.ids)
    labels: dict[str, int] = {}
    for key, value in raw.items():
        if key not in known:
            raise ManifestError(f"record {record_id!r}: label {key!r} is not in the schema")
        if value not in (0, 1):
            raise ManifestError(f"record {record_id!r}: label {key!r} must be 0 or 1")
        labels[key] = int(value)
    return labels


def _image_size(path: str, record_id: str) -> tuple[int, int]:
    from PIL import Image  # imported lazily: only records without regions need it

    try:
        with Image.open(path) as img:
            return img.size
    except OSError as exc:
        raise ManifestError(
            f"record {record_id!r}: regions absent and image unreadable ({exc})"
        ) from exc


def load_manifest(path: str, schema: AttributeSchema) -> Corpus:
    """Load and validate a JSONL manifest into a Corpus.

    Records without regions get the fixed-grid fallback (reading the image
    header for its size) and are marked grid_fallback.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc

    base = os.path.dirname(os.path.abspath(path))
    records: list[ImageRecord] = []
    seen: set[str] = set()
    fallback = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ManifestError(f"{path}:{lineno}: record must be an object")
        unknown = set(raw) - _RECORD_FIELDS
        if unknown:
            raise ManifestError(f"{path}:{lineno}: unknown fields {sorted(unknown)}")
        for req in ("id", "path", "source", "year"):
            if req not in raw:
                raise ManifestError(f"{path}:{lineno}: missing field {req!r}")
        record_id = raw["id"]
        if not isinstance(record_id, str) or not record_id:
            raise ManifestError(f"{path}:{lineno}: id must be a non-empty string")
        if record_id in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate image id {record_id!r}")
        seen.add(record_id)
        if raw["source"] not in SOURCES:
            raise ManifestError(f"record {record_id!r}: source must be one of {SOURCES}")
        if not isinstance(raw["year"], int) or isinstance(raw["year"], bool):
            raise ManifestError(f"record {record_id!r}: year must be an integer")
        month = raw.get("month")
        if month is not None and (not isinstance(month, int) or not 1 <= month <= 12):
            raise ManifestError(f"record {record_id!r}: month must be in 1..12")

        img_path = raw["path"]
        if not isinstance(img_path, str) or not img_path:
            raise ManifestError(f"record {record_id!r}: path must be a non-empty string")
        if not os.path.isabs(img_path):
            img_path = os.path.join(base, img_path)

        if "regions" in raw and raw["regions"] is not None:
            regions = _parse_regions(raw["regions"], record_id)
            grid = False
        else:
            regions = default_part_regions(*_image_size(img_path, record_id))
            grid = True
            fallback += 1

        labels = None
        if "labels" in raw and raw["labels"] is not None:
            labels = _parse_labels(raw["labels"], record_id, schema)

        records.append(
            ImageRecord(
                id=record_id,
                path=img_path,
                source=raw["source"],
                year=raw["year"],
                regions=regions,
                month=month,
                labels=labels,
                grid_fallback=grid,
            )
        )
    return Corpus(records=tuple(records), schema_version=schema.version, fallback_count=fallback)


def corpus_stats(corpus: Corpus) -> dict[tuple[str, int], int]:
    """Image counts keyed by (source, year); values sum to len(corpus)."""
    counts: dict[tuple[str, int], int] = {}
    for record in corpus.records:
        key = (record.source, record.year)
        counts[key] = counts.get(key, 0) + 1
    return counts


def stats_csv(counts: dict[tuple[str, int], int]) -> str:
    """Render corpus stats as versioned CSV text, sorted by (source, year)."""
    lines = ["# format: trendscope.corpus_stats/1", "source,year,count"]
    for (source, year), count in sorted(counts.items()):
        lines.append(f"{source},{year},{count}")
    lines.append(f"total,,{sum(counts.values())}")
    return "\n".join(lines) + "\n"
