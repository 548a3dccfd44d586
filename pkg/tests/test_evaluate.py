import json

import pytest

from trendscope.errors import ReportError
from trendscope.evaluate import accuracy_csv, evaluate, summary_line
from trendscope.ingest import load_manifest, default_part_regions
from trendscope.schema import load_schema

SCHEMA = load_schema(
    "id=belt name=Belt category=style classic=false\n"
    "id=accessories name=Accessories category=style classic=false\n"
    "id=collar name=Collar category=style classic=false\n"
    "id=necktie name=Necktie category=style classic=false\n"
)
REGIONS = [list(r.rect) for r in default_part_regions(50, 100)]


def _corpus(tmp_path, labels_by_id):
    lines = []
    for image_id, labels in labels_by_id.items():
        lines.append(
            json.dumps(
                {
                    "id": image_id,
                    "path": f"{image_id}.png",
                    "source": "fashion_show",
                    "year": 2014,
                    "regions": REGIONS,
                    "labels": labels,
                }
            )
        )
    path = tmp_path / "manifest.jsonl"
    path.write_text("\n".join(lines) + "\n")
    return load_manifest(str(path), SCHEMA)


def _full_labels(value=1):
    return {a: value for a in SCHEMA.ids}


def test_perfect_predictions(tmp_path):
    labels = {f"img{i}": _full_labels(i % 2) for i in range(6)}
    corpus = _corpus(tmp_path, labels)
    predictions = {k: dict(v) for k, v in labels.items()}
    report = evaluate(predictions, corpus, SCHEMA)
    assert report.overall == 1.0
    assert all(e.accuracy == 1.0 for e in report.per_attribute.values())


def test_hand_counted_errors(tmp_path):
    labels = {f"img{i}": _full_labels(1) for i in range(10)}
    corpus = _corpus(tmp_path, labels)
    predictions = {k: dict(v) for k, v in labels.items()}
    for i in range(3):  # three errors on belt only
        predictions[f"img{i}"]["belt"] = 0
    report = evaluate(predictions, corpus, SCHEMA)
    assert report.per_attribute["belt"].accuracy == pytest.approx(0.7)
    assert report.per_attribute["belt"].support == 10
    assert report.overall == pytest.approx((0.7 + 1.0 + 1.0 + 1.0) / 4)


def test_overall_is_mean_of_per_attribute(tmp_path):
    labels = {f"img{i}": _full_labels(i % 2) for i in range(8)}
    corpus = _corpus(tmp_path, labels)
    predictions = {k: dict(v) for k, v in labels.items()}
    predictions["img0"]["belt"] = 1 - predictions["img0"]["belt"]
    predictions["img1"]["collar"] = 1 - predictions["img1"]["collar"]
    report = evaluate(predictions, corpus, SCHEMA)
    mean = sum(e.accuracy for e in report.per_attribute.values()) / len(report.per_attribute)
    assert abs(report.overall - mean) <= 1e-12


def test_permuting_image_order_invariant(tmp_path):
    labels = {f"img{i}": _full_labels(i % 2) for i in range(6)}
    corpus = _corpus(tmp_path, labels)
    predictions = {k: dict(v) for k, v in labels.items()}
    predictions["img3"]["necktie"] = 0
    forward = evaluate(predictions, corpus, SCHEMA)
    reversed_preds = dict(reversed(list(predictions.items())))
    backward = evaluate(reversed_preds, corpus, SCHEMA)
    assert forward == backward


def test_overall_invariant_to_attribute_order(tmp_path):
    from trendscope.schema import AttributeSchema

    labels = {f"img{i}": _full_labels(i % 2) for i in range(6)}
    corpus = _corpus(tmp_path, labels)
    predictions = {k: dict(v) for k, v in labels.items()}
    predictions["img2"]["belt"] = 1 - predictions["img2"]["belt"]
    forward = evaluate(predictions, corpus, SCHEMA)
    reversed_schema = AttributeSchema(
        attributes=tuple(reversed(SCHEMA.attributes)), version=SCHEMA.version
    )
    backward = evaluate(predictions, corpus, reversed_schema)
    assert forward.overall == backward.overall


def test_zero_support_attribute_excluded_and_listed(tmp_path):
    labels = {
        "img0": {"belt": 1, "collar": 1},
        "img1": {"belt": 0, "collar": 1},
    }
    corpus = _corpus(tmp_path, labels)
    predictions = {"img0": {"belt": 1, "collar": 1}, "img1": {"belt": 0, "collar": 0}}
    report = evaluate(predictions, corpus, SCHEMA)
    assert set(report.skipped) == {"accessories", "necktie"}
    assert set(report.per_attribute) == {"belt", "collar"}
    assert report.overall == pytest.approx((1.0 + 0.5) / 2)
    assert "skipped" in summary_line(report)


def test_unknown_image_rejected(tmp_path):
    corpus = _corpus(tmp_path, {"img0": _full_labels()})
    with pytest.raises(ReportError, match="ghost"):
        evaluate({"ghost": _full_labels()}, corpus, SCHEMA)


def test_unlabeled_image_rejected(tmp_path):
    lines = [
        json.dumps(
            {"id": "img0", "path": "x.png", "source": "fashion_show", "year": 2014,
             "regions": REGIONS}
        )
    ]
    path = tmp_path / "m.jsonl"
    path.write_text("\n".join(lines) + "\n")
    corpus = load_manifest(str(path), SCHEMA)
    with pytest.raises(ReportError, match="labels"):
        evaluate({"img0": _full_labels()}, corpus, SCHEMA)


def test_csv_contains_required_rows(tmp_path):
    labels = {f"img{i}": _full_labels(i % 2) for i in range(4)}
    corpus = _corpus(tmp_path, labels)
    report = evaluate({k: dict(v) for k, v in labels.items()}, corpus, SCHEMA)
    csv = accuracy_csv(report)
    lines = csv.strip().splitlines()
    assert lines[0] == "# format: trendscope.accuracy/1"
    assert lines[1] == "attribute,support,accuracy"
    rows = {line.split(",")[0] for line in lines[2:]}
    assert {"belt", "accessories"} <= rows
