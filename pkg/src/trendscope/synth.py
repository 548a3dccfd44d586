"""Synthetic corpus generator for pipeline exercises and fixtures.

Paints attribute-conditional appearance into the fixed-grid part regions of
small images: garment hues for the color attributes, horizontal banding for
the striped attributes, skin tone on the arms for bare_arms, and a small
second-hue patch for multicolor_upper (deliberately subtle, so its direct
visual evidence is weak and the co-occurrence with striped_upper matters).
"""

from __future__ import annotations

import colorsys
import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import TrendscopeError
from .features.raster import Raster, save_raster
from .ingest import default_part_regions
from .schema import AttributeSchema, load_schema
from .seeds import derive_rng

SYNTH_SCHEMA_TEXT = """\
!version synth-8-v1
id=red_upper name="Red (upper)" category=color_upper classic=false
id=blue_upper name="Blue (upper)" category=color_upper classic=false
id=multicolor_upper name="Multicolor (upper)" category=color_upper classic=false
id=blue_lower name="Blue (lower)" category=color_lower classic=false
id=green_lower name="Green (lower)" category=color_lower classic=false
id=striped_upper name="Striped (upper)" category=pattern_upper classic=false
id=striped_lower name="Striped (lower)" category=pattern_lower classic=false
id=bare_arms name="Bare arms" category=style classic=false
"""

DEFAULT_IMAGE_SIZE = (80, 160)  # width, height
STRIPE_PERIOD = 6               # rows per light/dark stripe pair
MULTICOLOR_ROWS = 0.2           # torso fraction taken by the hem band
# hem-band hue offsets: the positive and negative ranges overlap, keeping a
# slice of each class visually undecidable from the band alone
MULTICOLOR_OFFSET_POS = (0.10, 0.70)
MULTICOLOR_OFFSET_NEG = (0.0, 0.18)


def synth_schema() -> AttributeSchema:
    return load_schema(SYNTH_SCHEMA_TEXT)


@dataclass(frozen=True)
class SynthRates:
    """Label-generation probabilities; upper colors and lower colors are
    mutually exclusive categorical draws.

    multicolor_upper tracks the CO-OCCURRENCE of striped_upper and bare_arms.
    A conjunction across two feature channels is exactly what the per-block
    additive kernel underfits, so joint decoding has real corrections to make
    on the (striped_upper, multicolor_upper) pair.
    """

    red_upper: float = 0.35
    blue_upper: float = 0.35
    blue_lower: float = 0.35
    green_lower: float = 0.35
    striped_upper: float = 0.4
    striped_lower: float = 0.35
    bare_arms: float = 0.5
    multicolor_given_striped_bare: float = 0.92
    multicolor_otherwise: float = 0.05

    def shifted(self, **changes: float) -> "SynthRates":
        return replace(self, **changes)


def sample_labels(rng: np.random.Generator, rates: SynthRates) -> dict[str, int]:
    u = rng.random()
    red = int(u < rates.red_upper)
    blue_u = int(rates.red_upper <= u < rates.red_upper + rates.blue_upper)
    v = rng.random()
    blue_l = int(v < rates.blue_lower)
    green = int(rates.blue_lower <= v < rates.blue_lower + rates.green_lower)
    striped_u = int(rng.random() < rates.striped_upper)
    striped_l = int(rng.random() < rates.striped_lower)
    bare = int(rng.random() < rates.bare_arms)
    p_mc = (
        rates.multicolor_given_striped_bare
        if (striped_u and bare)
        else rates.multicolor_otherwise
    )
    multicolor = int(rng.random() < p_mc)
    return {
        "red_upper": red,
        "blue_upper": blue_u,
        "multicolor_upper": multicolor,
        "blue_lower": blue_l,
        "green_lower": green,
        "striped_upper": striped_u,
        "striped_lower": striped_l,
        "bare_arms": bare,
    }


def _rgb(hue: float, sat: float, val: float) -> np.ndarray:
    r, g, b = colorsys.hsv_to_rgb(hue % 1.0, sat, val)
    return np.array([r * 255.0, g * 255.0, b * 255.0])


def _garment_hue(rng: np.random.Generator, kind: str) -> float:
    # hue ranges sit strictly inside distinct 8-bin hue cells
    ranges = {
        "red": (0.0, 0.04),
        "blue": (0.63, 0.70),
        "green": (0.28, 0.35),
        "other_upper": (0.15, 0.21),
        "other_lower": (0.80, 0.87),
    }
    lo, hi = ranges[kind]
    return float(rng.uniform(lo, hi))


def _fill(canvas: np.ndarray, rect: tuple[int, int, int, int], color: np.ndarray) -> None:
    x, y, w, h = rect
    canvas[y : y + h, x : x + w] = color


def _fill_striped(
    canvas: np.ndarray,
    rect: tuple[int, int, int, int],
    hue: float,
    sat: float,
    val: float,
    rng: np.random.Generator,
) -> None:
    """Subtle banding: randomized period, low contrast, and partial coverage
    keep the texture cue learnable but far from trivially separable."""
    x, y, w, h = rect
    period = int(rng.choice((6, 8, 12)))
    contrast = float(rng.uniform(0.78, 0.9))
    cover = max(period, int(h * float(rng.uniform(0.35, 0.7))))
    start = int(rng.integers(0, max(1, h - cover + 1)))
    light = _rgb(hue, sat, val)
    dark = _rgb(hue, sat, val * contrast)
    canvas[y : y + h, x : x + w] = light
    half = period // 2
    for row in range(start, min(h, start + cover)):
        if ((row - start) % period) >= half:
            canvas[y + row, x : x + w] = dark


def paint_image(
    labels: dict[str, int], rng: np.random.Generator, width: int, height: int
) -> Raster:
    regions = {r.part: r.rect for r in default_part_regions(width, height)}
    canvas = np.full((height, width, 3), 225.0)
    canvas += rng.normal(0.0, 3.0, size=canvas.shape)

    if labels["red_upper"]:
        torso_hue = _garment_hue(rng, "red")
    elif labels["blue_upper"]:
        torso_hue = _garment_hue(rng, "blue")
    else:
        torso_hue = _garment_hue(rng, "other_upper")
    torso_sat = float(rng.uniform(0.7, 0.95))
    torso_val = float(rng.uniform(0.6, 0.9))

    if labels["blue_lower"]:
        leg_hue = _garment_hue(rng, "blue")
    elif labels["green_lower"]:
        leg_hue = _garment_hue(rng, "green")
    else:
        leg_hue = _garment_hue(rng, "other_lower")
    leg_sat = float(rng.uniform(0.7, 0.95))
    leg_val = float(rng.uniform(0.6, 0.9))

    if labels["striped_upper"]:
        _fill_striped(canvas, regions["torso"], torso_hue, torso_sat, torso_val, rng)
    else:
        _fill(canvas, regions["torso"], _rgb(torso_hue, torso_sat, torso_val))

    for part in ("upper_left_leg", "upper_right_leg", "lower_left_leg", "lower_right_leg"):
        if labels["striped_lower"]:
            _fill_striped(canvas, regions[part], leg_hue, leg_sat, leg_val, rng)
        else:
            _fill(canvas, regions[part], _rgb(leg_hue, leg_sat, leg_val))

    for part in ("upper_left_arm", "upper_right_arm", "lower_left_arm", "lower_right_arm"):
        if labels["bare_arms"]:
            skin = np.array([224.0, 172.0, 105.0]) + rng.uniform(-10.0, 10.0, size=3)
            _fill(canvas, regions[part], skin)
        else:
            _fill(canvas, regions[part], _rgb(torso_hue, torso_sat, torso_val * 0.9))

    # hem band at the torso bottom: every garment has one, and its hue offset
    # from the base overlaps between the classes, so borderline bands leave
    # the direct evidence genuinely ambiguous
    x, y, w, h = regions["torso"]
    band_rows = max(1, int(h * MULTICOLOR_ROWS))
    if labels["multicolor_upper"]:
        offset = float(rng.uniform(MULTICOLOR_OFFSET_POS[0], MULTICOLOR_OFFSET_POS[1]))
    else:
        offset = float(rng.uniform(MULTICOLOR_OFFSET_NEG[0], MULTICOLOR_OFFSET_NEG[1]))
    band = _rgb(torso_hue + offset, 0.9, float(rng.uniform(0.6, 0.9)))
    _fill(canvas, (x, y + h - band_rows, w, band_rows), band)

    canvas += rng.normal(0.0, 6.0, size=canvas.shape)
    return Raster(np.clip(canvas, 0.0, 255.0).astype(np.uint8))


def generate_corpus(
    out_dir: str,
    count: int,
    seed: int,
    source: str = "fashion_show",
    year: int = 2014,
    rates: SynthRates | None = None,
    id_prefix: str = "img",
    min_class_count: int = 3,
    image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE,
) -> str:
    """Write count painted images plus a manifest; returns the manifest path.

    Label sets are redrawn (seeded) until every attribute has at least
    min_class_count examples of each class, so downstream cross-validation
    always has both classes per fold.
    """
    if count < 2:
        raise TrendscopeError("synthetic corpus needs at least two images")
    rates = rates or SynthRates()
    rng = derive_rng(seed, f"synth:{source}:{year}:{id_prefix}")
    schema = synth_schema()

    for _ in range(500):
        label_sets = [sample_labels(rng, rates) for _ in range(count)]
        counts = {a: sum(ls[a] for ls in label_sets) for a in schema.ids}
        if all(min_class_count <= counts[a] <= count - min_class_count for a in schema.ids):
            break
    else:
        raise TrendscopeError(
            "could not sample labels meeting the per-class minimum; "
            "increase count or adjust rates"
        )

    os.makedirs(out_dir, exist_ok=True)
    image_dir = os.path.join(out_dir, "images")
    os.makedirs(image_dir, exist_ok=True)
    width, height = image_size
    regions = default_part_regions(width, height)
    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for i, labels in enumerate(label_sets):
            image_id = f"{id_prefix}{i:04d}"
            rel_path = os.path.join("images", f"{image_id}.png")
            raster = paint_image(labels, rng, width, height)
            save_raster(raster, os.path.join(out_dir, rel_path))
            record = {
                "id": image_id,
                "path": rel_path,
                "source": source,
                "year": year,
                "month": int(rng.integers(4, 8)),
                "regions": [list(r.rect) for r in regions],
                "labels": labels,
            }
            fh.write(json.dumps(record) + "\n")
    return manifest_path
