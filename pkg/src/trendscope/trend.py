"""Trend analytics: prevalence tables, classic-filtered year-over-year
deltas, and per-category correlation between the runway and street corpora.

Report categories pool the upper/lower halves of color and pattern into
single "color" and "pattern" vectors (style stays as-is), which is what the
three headline correlation coefficients are computed over; per-half
coefficients are emitted alongside for finer reading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ReportError
from .schema import AttributeSchema, classic_ids

REPORT_CATEGORIES = ("style", "pattern", "color")
SIGN_THRESHOLD = 0.01  # |delta| below this counts as flat for sign agreement

_CATEGORY_POOL = {
    "style": ("style",),
    "pattern": ("pattern_upper", "pattern_lower"),
    "color": ("color_upper", "color_lower"),
}


@dataclass(frozen=True)
class PrevalenceTable:
    source: str
    year: int
    fractions: dict[str, float]  # attribute id -> fraction of images present
    image_count: int

    def __post_init__(self) -> None:
        if self.image_count <= 0:
            raise ReportError("prevalence table needs at least one image")
        for attr_id, value in self.fractions.items():
            if not 0.0 <= value <= 1.0:
                raise ReportError(f"prevalence for {attr_id!r} outside [0, 1]")


@dataclass(frozen=True)
class TrendDelta:
    attribute_id: str
    delta: float  # prevalence(year2) - prevalence(year1)


@dataclass(frozen=True)
class CategoryTrend:
    category: str
    attribute_ids: tuple[str, ...]
    show_deltas: tuple[float, ...]
    street_deltas: tuple[float, ...]
    r: float | None              # None when either delta vector is constant
    agreement: tuple[str, ...]   # per attribute: "correlated" | "divergent" | "flat"


@dataclass(frozen=True)
class TrendReport:
    categories: dict[str, CategoryTrend]
    per_half_r: dict[str, float | None]  # schema-category granularity
    years: tuple[int, int]
    sign_threshold: float


def prevalence(
    decisions: dict[str, dict[str, int]], source: str, year: int, schema: AttributeSchema
) -> PrevalenceTable:
    """Fraction of images with each attribute decided present."""
    if not decisions:
        raise ReportError(f"no decisions for corpus ({source}, {year})")
    counts = {attr_id: 0 for attr_id in schema.ids}
    for image_id, decided in decisions.items():
        for attr_id, value in decided.items():
            if attr_id not in counts:
                raise ReportError(f"image {image_id!r}: attribute {attr_id!r} not in schema")
            counts[attr_id] += int(value)
    n = len(decisions)
    return PrevalenceTable(
        source=source,
        year=year,
        fractions={attr_id: counts[attr_id] / n for attr_id in schema.ids},
        image_count=n,
    )


def deltas(
    p1: PrevalenceTable,
    p2: PrevalenceTable,
    schema: AttributeSchema,
    exclude_classic: bool = True,
) -> list[TrendDelta]:
    """Per-attribute prevalence change p2 - p1, optionally dropping classics."""
    missing = [a for a in schema.ids if a not in p1.fractions or a not in p2.fractions]
    if missing:
        raise ReportError(f"prevalence tables missing attributes: {missing}")
    excluded = classic_ids(schema) if exclude_classic else set()
    return [
        TrendDelta(attribute_id=a, delta=p2.fractions[a] - p1.fractions[a])
        for a in schema.ids
        if a not in excluded
    ]


def pearson(xs: list[float], ys: list[float]) -> float | None:
    """Sample Pearson r; None when either vector has zero variance."""
    if len(xs) != len(ys):
        raise ReportError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ReportError("pearson needs at least two points")
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    dx = [x - mean_x for x in xs]
    dy = [y - mean_y for y in ys]
    sxx = sum(d * d for d in dx)
    syy = sum(d * d for d in dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    sxy = sum(a * b for a, b in zip(dx, dy))
    return sxy / math.sqrt(sxx * syy)


def _sign_agreement(show: float, street: float, threshold: float) -> str:
    if abs(show) <= threshold or abs(street) <= threshold:
        return "flat"
    return "correlated" if (show > 0) == (street > 0) else "divergent"


def build_report(
    show1: PrevalenceTable,
    show2: PrevalenceTable,
    street1: PrevalenceTable,
    street2: PrevalenceTable,
    schema: AttributeSchema,
    sign_threshold: float = SIGN_THRESHOLD,
) -> TrendReport:
    """Full trend report over the four corpus cells (classics excluded)."""
    for table, source in ((show1, "fashion_show"), (show2, "fashion_show"),
                          (street1, "street_chic"), (street2, "street_chic")):
        if table.source != source:
            raise ReportError(f"expected a {source} table, got {table.source}")
    if show1.year != street1.year or show2.year != street2.year:
        raise ReportError("show and street tables must cover the same year pair")

    show_deltas = {d.attribute_id: d.delta for d in deltas(show1, show2, schema)}
    street_deltas = {d.attribute_id: d.delta for d in deltas(street1, street2, schema)}

    by_schema_category: dict[str, list[str]] = {}
    for attr in schema.attributes:
        if attr.id in show_deltas:
            by_schema_category.setdefault(attr.category, []).append(attr.id)

    categories: dict[str, CategoryTrend] = {}
    for category in REPORT_CATEGORIES:
        attr_list: list[str] = []
        for schema_cat in _CATEGORY_POOL[category]:
            attr_list.extend(by_schema_category.get(schema_cat, []))
        show_vec = [show_deltas[a] for a in attr_list]
        street_vec = [street_deltas[a] for a in attr_list]
        r = pearson(show_vec, street_vec) if len(attr_list) >= 2 else None
        agreement = tuple(
            _sign_agreement(s, t, sign_threshold) for s, t in zip(show_vec, street_vec)
        )
        categories[category] = CategoryTrend(
            category=category,
            attribute_ids=tuple(attr_list),
            show_deltas=tuple(show_vec),
            street_deltas=tuple(street_vec),
            r=r,
            agreement=agreement,
        )

    per_half_r: dict[str, float | None] = {}
    for schema_cat, attr_list in by_schema_category.items():
        if len(attr_list) >= 2:
            per_half_r[schema_cat] = pearson(
                [show_deltas[a] for a in attr_list], [street_deltas[a] for a in attr_list]
            )
        else:
            per_half_r[schema_cat] = None

    return TrendReport(
        categories=categories,
        per_half_r=per_half_r,
        years=(show1.year, show2.year),
        sign_threshold=sign_threshold,
    )


def deltas_csv(report: TrendReport) -> str:
    """Versioned CSV of per-attribute deltas and their sign agreement."""
    lines = [
        "# format: trendscope.trend_deltas/1",
        "category,attribute,show_delta,street_delta,sign_agreement",
    ]
    for category in REPORT_CATEGORIES:
        trend = report.categories[category]
        for attr_id, show, street, agree in zip(
            trend.attribute_ids, trend.show_deltas, trend.street_deltas, trend.agreement
        ):
            lines.append(f"{category},{attr_id},{show:.6f},{street:.6f},{agree}")
    return "\n".join(lines) + "\n"


def correlations_csv(report: TrendReport) -> str:
    """Versioned CSV of the per-category correlation coefficients."""
    lines = ["# format: trendscope.trend_correlations/1", "category,defined,r,attributes"]
    for category in REPORT_CATEGORIES:
        trend = report.categories[category]
        defined = trend.r is not None
        r_text = f"{trend.r:.6f}" if defined else ""
        lines.append(f"{category},{str(defined).lower()},{r_text},{len(trend.attribute_ids)}")
    for schema_cat, r in sorted(report.per_half_r.items()):
        defined = r is not None
        r_text = f"{r:.6f}" if defined else ""
        lines.append(f"half:{schema_cat},{str(defined).lower()},{r_text},")
    return "\n".join(lines) + "\n"


def report_to_doc(report: TrendReport) -> dict:
    """JSON-ready structured summary of a trend report."""
    return {
        "format": "trendscope.trend_report",
        "version": 1,
        "years": list(report.years),
        "sign_threshold": report.sign_threshold,
        "categories": {
            category: {
                "attributes": list(trend.attribute_ids),
                "show_deltas": list(trend.show_deltas),
                "street_deltas": list(trend.street_deltas),
                "r": trend.r,
                "r_defined": trend.r is not None,
                "agreement": list(trend.agreement),
            }
            for category, trend in report.categories.items()
        },
        "per_half_r": {
            cat: {"r": r, "r_defined": r is not None} for cat, r in report.per_half_r.items()
        },
    }


def report_from_doc(doc: dict) -> TrendReport:
    if doc.get("format") != "trendscope.trend_report" or doc.get("version") != 1:
        raise ReportError("not a trendscope trend report (v1)")
    categories = {
        category: CategoryTrend(
            category=category,
            attribute_ids=tuple(data["attributes"]),
            show_deltas=tuple(data["show_deltas"]),
            street_deltas=tuple(data["street_deltas"]),
            r=data["r"],
            agreement=tuple(data["agreement"]),
        )
        for category, data in doc["categories"].items()
    }
    return TrendReport(
        categories=categories,
        per_half_r={cat: data["r"] for cat, data in doc["per_half_r"].items()},
        years=tuple(doc["years"]),
        sign_threshold=doc["sign_threshold"],
    )
