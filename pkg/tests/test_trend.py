import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from trendscope.errors import ReportError
from trendscope.schema import classic_ids, load_default_schema
from trendscope.trend import (
    PrevalenceTable,
    build_report,
    correlations_csv,
    deltas,
    deltas_csv,
    pearson,
    prevalence,
    report_from_doc,
    report_to_doc,
)

SCHEMA = load_default_schema()


def _decisions(n, rates, rng):
    """n per-image decision dicts with planted per-attribute rates (exact counts)."""
    out = {}
    positives = {a: int(round(r * n)) for a, r in rates.items()}
    for i in range(n):
        out[f"img{i}"] = {a: 0 for a in SCHEMA.ids}
    order = {a: rng.permutation(n) for a in rates}
    for a, count in positives.items():
        for i in order[a][:count]:
            out[f"img{int(i)}"][a] = 1
    return out


def _table(rates, source, year, n=200, seed=0):
    rng = np.random.default_rng(seed)
    return prevalence(_decisions(n, rates, rng), source, year, SCHEMA)


# --- prevalence ----------------------------------------------------------------


def test_prevalence_all_positive():
    decisions = {f"i{k}": {"skirt": 1} for k in range(5)}
    table = prevalence(decisions, "fashion_show", 2014, SCHEMA)
    assert table.fractions["skirt"] == 1.0
    assert table.image_count == 5


def test_prevalence_quarter():
    decisions = {f"i{k}": {"skirt": 1 if k == 0 else 0} for k in range(4)}
    table = prevalence(decisions, "fashion_show", 2014, SCHEMA)
    assert table.fractions["skirt"] == 0.25


def test_prevalence_planted_rate():
    rng = np.random.default_rng(1)
    decisions = {}
    for i in range(50):
        decisions[f"i{i}"] = {"striped_upper": int(rng.random() < 0.3)}
    table = prevalence(decisions, "fashion_show", 2014, SCHEMA)
    planted = sum(d["striped_upper"] for d in decisions.values()) / 50
    assert table.fractions["striped_upper"] == pytest.approx(planted)
    assert abs(table.fractions["striped_upper"] - 0.3) < 0.2  # binomial noise band


def test_prevalence_invariant_to_image_order():
    rng = np.random.default_rng(2)
    decisions = _decisions(20, {"striped_upper": 0.4, "collar": 0.3}, rng)
    forward = prevalence(decisions, "fashion_show", 2014, SCHEMA)
    shuffled = dict(reversed(list(decisions.items())))
    backward = prevalence(shuffled, "fashion_show", 2014, SCHEMA)
    assert forward == backward


def test_prevalence_empty_rejected():
    with pytest.raises(ReportError):
        prevalence({}, "fashion_show", 2014, SCHEMA)


def test_prevalence_unknown_attribute_rejected():
    with pytest.raises(ReportError, match="mystery"):
        prevalence({"i0": {"mystery": 1}}, "fashion_show", 2014, SCHEMA)


# --- deltas ----------------------------------------------------------------------


def test_deltas_identical_tables_zero():
    table = _table({"striped_upper": 0.4}, "fashion_show", 2014)
    for delta in deltas(table, table, SCHEMA):
        assert delta.delta == 0.0


def test_deltas_exclude_classics():
    t1 = _table({"black_upper": 0.5, "striped_upper": 0.2}, "fashion_show", 2014)
    t2 = _table({"black_upper": 0.8, "striped_upper": 0.4}, "fashion_show", 2015)
    result = deltas(t1, t2, SCHEMA, exclude_classic=True)
    ids = {d.attribute_id for d in result}
    assert ids.isdisjoint(classic_ids(SCHEMA))
    assert ids == set(SCHEMA.ids) - classic_ids(SCHEMA)
    kept = deltas(t1, t2, SCHEMA, exclude_classic=False)
    assert {d.attribute_id for d in kept} == set(SCHEMA.ids)


def test_deltas_planted_shift():
    t1 = _table({"striped_upper": 0.3}, "fashion_show", 2014)
    t2 = _table({"striped_upper": 0.5}, "fashion_show", 2015)
    by_id = {d.attribute_id: d.delta for d in deltas(t1, t2, SCHEMA)}
    assert by_id["striped_upper"] == pytest.approx(0.2, abs=1e-9)


def test_deltas_antisymmetry():
    t1 = _table({"striped_upper": 0.3, "collar": 0.6}, "fashion_show", 2014)
    t2 = _table({"striped_upper": 0.45, "collar": 0.25}, "fashion_show", 2015)
    forward = {d.attribute_id: d.delta for d in deltas(t1, t2, SCHEMA)}
    backward = {d.attribute_id: d.delta for d in deltas(t2, t1, SCHEMA)}
    for attr_id, value in forward.items():
        assert backward[attr_id] == pytest.approx(-value, abs=1e-12)


# --- pearson ----------------------------------------------------------------------


def test_pearson_identical_vectors():
    assert pearson([1.0, 2.0, 5.0], [1.0, 2.0, 5.0]) == pytest.approx(1.0)


def test_pearson_reversed():
    assert pearson([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]) == pytest.approx(-1.0)


def test_pearson_hand_evaluated_fixture():
    # hand evaluation: dx=(-1.5,-0.5,0.5,1.5), dy=(-1.75,0.25,1.25,0.25)
    # sum dx*dy = 3.5, sum dx^2 = 5, sum dy^2 = 4.75 -> r = 7/sqrt(95)
    r = pearson([1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 5.0, 4.0])
    assert r == pytest.approx(7.0 / math.sqrt(95.0), abs=1e-12)


def test_pearson_zero_variance_undefined():
    assert pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None
    assert pearson([1.0, 2.0, 3.0], [5.0, 5.0, 5.0]) is None


def test_pearson_validation():
    with pytest.raises(ReportError):
        pearson([1.0], [1.0])
    with pytest.raises(ReportError):
        pearson([1.0, 2.0], [1.0])


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(min_value=-100, max_value=100), min_size=3, max_size=10),
    st.floats(min_value=0.1, max_value=10.0),
    st.floats(min_value=-50.0, max_value=50.0),
)
def test_pearson_affine_invariance(xs, a, b):
    # enough spread that the affine shift cannot absorb the variance in floats
    assume(max(xs) - min(xs) > 1e-3)
    rng = np.random.default_rng(len(xs))
    ys = rng.normal(size=len(xs)).tolist()
    base = pearson(xs, ys)
    if base is None:
        return
    scaled = pearson([a * x + b for x in xs], ys)
    assert scaled == pytest.approx(base, abs=1e-6)
    negated = pearson([-a * x + b for x in xs], ys)
    assert negated == pytest.approx(-base, abs=1e-6)


# --- build_report -------------------------------------------------------------------


def _four_tables(show_shift, street_shift, base=None):
    base = base or {
        "striped_upper": 0.3, "plaid_upper": 0.3, "striped_lower": 0.3, "plaid_lower": 0.3,
        "collar": 0.4, "tank_top": 0.3, "outwear": 0.4, "placket": 0.3,
        "blue_upper": 0.3, "red_upper": 0.3, "cyan_upper": 0.2, "blue_lower": 0.3,
    }
    shifted_show = {a: base.get(a, 0.0) + show_shift.get(a, 0.0) for a in base}
    shifted_street = {a: base.get(a, 0.0) + street_shift.get(a, 0.0) for a in base}
    return (
        _table(base, "fashion_show", 2014, seed=1),
        _table(shifted_show, "fashion_show", 2015, seed=2),
        _table(base, "street_chic", 2014, seed=3),
        _table(shifted_street, "street_chic", 2015, seed=4),
    )


def _retag(table, source):
    return PrevalenceTable(
        source=source, year=table.year, fractions=dict(table.fractions),
        image_count=table.image_count,
    )


def test_report_identical_corpora_r_one():
    shift = {"striped_upper": 0.2, "plaid_upper": -0.15, "collar": 0.1, "tank_top": -0.1}
    show1, show2, _s1, _s2 = _four_tables(shift, shift)
    report = build_report(
        show1, show2, _retag(show1, "street_chic"), _retag(show2, "street_chic"), SCHEMA
    )
    for trend in report.categories.values():
        if trend.r is not None:
            assert trend.r == pytest.approx(1.0)


def test_report_planted_correlated_and_anticorrelated():
    pattern_shift = {"striped_upper": 0.2, "plaid_upper": -0.15,
                     "striped_lower": 0.1, "plaid_lower": -0.05}
    style_shift = {"collar": 0.15, "tank_top": -0.1, "outwear": 0.08, "placket": -0.12}
    show_shift = dict(pattern_shift)
    show_shift.update(style_shift)
    street_shift = {a: v * 0.8 for a, v in pattern_shift.items()}
    street_shift.update({a: -v for a, v in style_shift.items()})
    tables = _four_tables(show_shift, street_shift)
    report = build_report(*tables, SCHEMA)
    assert report.categories["pattern"].r > 0.9
    assert report.categories["style"].r < -0.9
    # classic attributes never appear
    for trend in report.categories.values():
        assert classic_ids(SCHEMA).isdisjoint(trend.attribute_ids)
    # sign agreement marks the planted movers
    pattern = report.categories["pattern"]
    flags = dict(zip(pattern.attribute_ids, pattern.agreement))
    assert flags["striped_upper"] == "correlated"
    style = report.categories["style"]
    style_flags = dict(zip(style.attribute_ids, style.agreement))
    assert style_flags["collar"] == "divergent"


def test_report_csv_outputs():
    tables = _four_tables({"striped_upper": 0.2}, {"striped_upper": 0.15})
    report = build_report(*tables, SCHEMA)
    dcsv = deltas_csv(report)
    assert dcsv.startswith("# format: trendscope.trend_deltas/1\n")
    assert "category,attribute,show_delta,street_delta,sign_agreement" in dcsv
    ccsv = correlations_csv(report)
    lines = [l for l in ccsv.splitlines() if not l.startswith("#")]
    categories = {l.split(",")[0] for l in lines[1:]}
    assert {"style", "pattern", "color"} <= categories
    assert any(c.startswith("half:color_upper") for c in categories)


def test_report_roundtrip_doc():
    tables = _four_tables({"striped_upper": 0.2}, {"striped_upper": -0.1})
    report = build_report(*tables, SCHEMA)
    doc = report_to_doc(report)
    assert report_from_doc(doc) == report


def test_report_year_and_source_validation():
    show1, show2, street1, street2 = _four_tables({}, {})
    with pytest.raises(ReportError):
        build_report(show1, show2, street2, street1, SCHEMA)  # years crossed
    with pytest.raises(ReportError):
        build_report(street1, show2, show1, street2, SCHEMA)  # wrong source slot


def test_report_undefined_r_flagged_not_zero():
    # constant deltas in style -> zero variance -> undefined, never 0 or NaN
    tables = _four_tables({"striped_upper": 0.2}, {})
    report = build_report(*tables, SCHEMA)
    style = report.categories["style"]
    assert style.r is None
    doc = report_to_doc(report)
    assert doc["categories"]["style"]["r_defined"] is False
    assert doc["categories"]["style"]["r"] is None
    csv = correlations_csv(report)
    assert "style,false,," in csv
