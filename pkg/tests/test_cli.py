import json
import os
import subprocess
import sys

import pytest

from trendscope.cli import run
from trendscope.schema import load_schema
from trendscope.synth import SYNTH_SCHEMA_TEXT, SynthRates, generate_corpus
from trendscope.trend import build_report, prevalence


def _write_schema(tmp_path):
    path = tmp_path / "schema.txt"
    path.write_text(SYNTH_SCHEMA_TEXT)
    return str(path)


def test_pearson_debug_subcommand(capsys):
    assert run(["pearson", "--xs", "1,2,3", "--ys", "3,2,1"]) == 0
    assert capsys.readouterr().out.strip() == "-1.0"


def test_pearson_undefined(capsys):
    assert run(["pearson", "--xs", "1,1,1", "--ys", "1,2,3"]) == 0
    assert capsys.readouterr().out.strip() == "undefined"


def test_pearson_bad_values(capsys):
    assert run(["pearson", "--xs", "1,zebra", "--ys", "1,2"]) == 1


def test_unknown_subcommand_usage_error(capsys):
    assert run(["conjure"]) == 2


def test_missing_required_argument(capsys):
    assert run(["ingest"]) == 2


def test_data_error_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("this is not json\n")
    code = run(["ingest", "--manifest", str(bad), "--out", str(tmp_path / "out")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_module_entry_point_exit_codes(tmp_path):
    env = dict(os.environ, PYTHONPATH=os.pathsep.join(sys.path))
    ok = subprocess.run(
        [sys.executable, "-m", "trendscope", "pearson", "--xs", "1,2", "--ys", "2,4"],
        capture_output=True, text=True, env=env,
    )
    assert ok.returncode == 0
    assert ok.stdout.strip() == "1.0"
    usage = subprocess.run(
        [sys.executable, "-m", "trendscope", "wibble"],
        capture_output=True, text=True, env=env,
    )
    assert usage.returncode == 2


def test_ingest_writes_stats_and_run_manifest(tmp_path, capsys):
    manifest = generate_corpus(str(tmp_path / "corpus"), 6, seed=1, min_class_count=0)
    out = tmp_path / "out"
    schema = _write_schema(tmp_path)
    assert run(["ingest", "--manifest", manifest, "--out", str(out), "--schema", schema]) == 0
    stats = (out / "corpus_stats.csv").read_text()
    assert stats.startswith("# format: trendscope.corpus_stats/1")
    assert "fashion_show,2014,6" in stats
    run_doc = json.loads((out / "ingest.run.json").read_text())
    assert run_doc["command"] == "ingest"
    assert run_doc["seed"] == 0
    assert run_doc["inputs"]["manifest"]["sha256"]


def test_config_file_parsing(tmp_path):
    config = tmp_path / "conf.txt"
    config.write_text("c_param = 2.0\nfolds = 2\n# comment\ncodebook_k = 8\n")
    from trendscope.config import load_config

    cfg = load_config(str(config))
    assert cfg.c_param == 2.0 and cfg.folds == 2 and cfg.codebook_k == 8

    bad = tmp_path / "bad.txt"
    bad.write_text("mystery_knob = 3\n")
    from trendscope.errors import TrendscopeError

    with pytest.raises(TrendscopeError, match="mystery_knob"):
        load_config(str(bad))


def test_synth_subcommand_rate_override(tmp_path):
    out = tmp_path / "synthcli"
    assert run([
        "synth", "--out", str(out), "--count", "8", "--seed", "3",
        "--rate", "striped_upper=0.6",
    ]) == 0
    lines = (out / "manifest.jsonl").read_text().strip().splitlines()
    assert len(lines) == 8
    assert (out / "synth.run.json").exists()


@pytest.fixture(scope="module")
def small_pipeline(tmp_path_factory):
    """Full CLI pipeline on a small synthetic corpus, shared across tests."""
    root = tmp_path_factory.mktemp("pipeline")
    schema_path = str(root / "schema.txt")
    with open(schema_path, "w") as fh:
        fh.write(SYNTH_SCHEMA_TEXT)

    train_manifest = generate_corpus(str(root / "train"), 28, seed=101, id_prefix="tr")
    test_manifest = generate_corpus(str(root / "test"), 12, seed=102, id_prefix="te")

    base = ["--schema", schema_path, "--seed", "0"]
    config = str(root / "config.txt")
    with open(config, "w") as fh:
        fh.write("codebook_k = 8\nholdout = 0\n")
    base += ["--config", config]

    cb_out = str(root / "cb")
    assert run(["codebook", "--manifest", train_manifest, "--out", cb_out, *base]) == 0
    codebook = os.path.join(cb_out, "codebook.json")

    feat_train = str(root / "feat_train")
    feat_test = str(root / "feat_test")
    assert run(["extract", "--manifest", train_manifest, "--codebook", codebook,
                "--out", feat_train, *base]) == 0
    assert run(["extract", "--manifest", test_manifest, "--codebook", codebook,
                "--out", feat_test, *base]) == 0

    model_out = str(root / "model")
    assert run(["train", "--manifest", train_manifest,
                "--features", os.path.join(feat_train, "features.jsonl"),
                "--out", model_out, *base]) == 0

    pred_out = str(root / "pred")
    assert run(["predict", "--manifest", test_manifest,
                "--features", os.path.join(feat_test, "features.jsonl"),
                "--model", os.path.join(model_out, "model.json"),
                "--potentials", os.path.join(model_out, "potentials.json"),
                "--out", pred_out, "--mode", "map", *base]) == 0

    eval_out = str(root / "eval")
    assert run(["eval", "--predictions", os.path.join(pred_out, "predictions.jsonl"),
                "--manifest", test_manifest, "--out", eval_out, *base]) == 0

    return {
        "root": root,
        "schema": schema_path,
        "base": base,
        "codebook": codebook,
        "train_manifest": train_manifest,
        "test_manifest": test_manifest,
        "model": os.path.join(model_out, "model.json"),
        "potentials": os.path.join(model_out, "potentials.json"),
        "predictions": os.path.join(pred_out, "predictions.jsonl"),
        "accuracy": os.path.join(eval_out, "accuracy.csv"),
    }


def test_pipeline_outputs_exist(small_pipeline):
    for key in ("codebook", "model", "potentials", "predictions", "accuracy"):
        assert os.path.exists(small_pipeline[key]), key


def test_pipeline_accuracy_csv_schema(small_pipeline):
    lines = open(small_pipeline["accuracy"]).read().strip().splitlines()
    assert lines[0] == "# format: trendscope.accuracy/1"
    assert lines[1] == "attribute,support,accuracy"
    schema = load_schema(SYNTH_SCHEMA_TEXT)
    assert {line.split(",")[0] for line in lines[2:]} == set(schema.ids)


def test_predictions_cover_test_corpus(small_pipeline):
    lines = [json.loads(l) for l in open(small_pipeline["predictions"]) if l.strip()]
    header, rows = lines[0], lines[1:]
    assert header["format"] == "trendscope.predictions"
    assert header["mode"] == "map"
    assert len(rows) == 12
    schema = load_schema(SYNTH_SCHEMA_TEXT)
    for row in rows:
        assert set(row["decisions"]) == set(schema.ids)
        assert all(v in (0, 1) for v in row["decisions"].values())
        assert all(0.0 <= v <= 1.0 for v in row["probs"].values())


def test_trend_and_report_cli_match_library_oracle(small_pipeline, capsys):
    root = small_pipeline["root"]
    base = small_pipeline["base"]
    schema = load_schema(SYNTH_SCHEMA_TEXT)

    # four decision cells predicted by the pipeline
    cells = {}
    prediction_files = []
    for source, year, seed, shift in (
        ("fashion_show", 2014, 201, {}),
        ("fashion_show", 2015, 202, {"striped_upper": 0.62, "bare_arms": 0.65}),
        ("street_chic", 2014, 203, {}),
        ("street_chic", 2015, 204, {"striped_upper": 0.6, "bare_arms": 0.35}),
    ):
        rates = SynthRates().shifted(**shift)
        tag = f"{source}_{year}"
        manifest = generate_corpus(
            str(root / tag), 14, seed=seed, source=source, year=year,
            rates=rates, id_prefix=tag,
        )
        feat_dir = str(root / f"feat_{tag}")
        assert run(["extract", "--manifest", manifest, "--codebook",
                    small_pipeline["codebook"], "--out", feat_dir, *base]) == 0
        pred_dir = str(root / f"pred_{tag}")
        assert run(["predict", "--manifest", manifest,
                    "--features", os.path.join(feat_dir, "features.jsonl"),
                    "--model", small_pipeline["model"],
                    "--potentials", small_pipeline["potentials"],
                    "--out", pred_dir, "--mode", "map", *base]) == 0
        path = os.path.join(pred_dir, "predictions.jsonl")
        prediction_files.append(path)
        rows = [json.loads(l) for l in open(path) if l.strip()][1:]
        cells[(source, year)] = {r["id"]: r["decisions"] for r in rows}

    trend_dir = str(root / "trend")
    assert run(["trend", "--predictions", *prediction_files, "--out", trend_dir, *base]) == 0
    report_doc = json.loads(open(os.path.join(trend_dir, "trend_report.json")).read())

    # library oracle from the same decisions
    tables = {
        key: prevalence(decisions, key[0], key[1], schema) for key, decisions in cells.items()
    }
    oracle = build_report(
        tables[("fashion_show", 2014)], tables[("fashion_show", 2015)],
        tables[("street_chic", 2014)], tables[("street_chic", 2015)], schema,
    )
    for category, trend in oracle.categories.items():
        doc_cat = report_doc["categories"][category]
        assert doc_cat["r"] == trend.r or (
            trend.r is not None and doc_cat["r"] == pytest.approx(trend.r)
        )
        assert list(doc_cat["show_deltas"]) == pytest.approx(list(trend.show_deltas))

    report_dir = str(root / "report")
    assert run(["report", "--trend", os.path.join(trend_dir, "trend_report.json"),
                "--accuracy", small_pipeline["accuracy"], "--out", report_dir, *base]) == 0
    produced = sorted(os.listdir(report_dir))
    for name in ("trend_deltas.csv", "trend_correlations.csv", "trend_style.svg",
                 "trend_pattern.svg", "trend_color.svg", "summary.txt", "accuracy.svg"):
        assert name in produced, name

    corr_lines = open(os.path.join(report_dir, "trend_correlations.csv")).read().splitlines()
    assert corr_lines[1] == "category,defined,r,attributes"
    assert {l.split(",")[0] for l in corr_lines[2:]} >= {"style", "pattern", "color"}


def test_extract_jobs_invariance(small_pipeline, tmp_path):
    base = small_pipeline["base"]
    out1 = str(tmp_path / "jobs1")
    out2 = str(tmp_path / "jobs2")
    assert run(["extract", "--manifest", small_pipeline["test_manifest"],
                "--codebook", small_pipeline["codebook"], "--out", out1,
                "--jobs", "1", *base]) == 0
    assert run(["extract", "--manifest", small_pipeline["test_manifest"],
                "--codebook", small_pipeline["codebook"], "--out", out2,
                "--jobs", "3", *base]) == 0
    bytes1 = open(os.path.join(out1, "features.jsonl"), "rb").read()
    bytes2 = open(os.path.join(out2, "features.jsonl"), "rb").read()
    assert bytes1 == bytes2


def test_predict_rejects_wrong_codebook(small_pipeline, tmp_path):
    base = small_pipeline["base"]
    # a codebook trained on different data has a different fingerprint
    other_manifest = generate_corpus(str(tmp_path / "other"), 8, seed=999)
    cb_dir = str(tmp_path / "cb2")
    assert run(["codebook", "--manifest", other_manifest, "--out", cb_dir, *base]) == 0
    feat_dir = str(tmp_path / "feat2")
    assert run(["extract", "--manifest", small_pipeline["test_manifest"],
                "--codebook", os.path.join(cb_dir, "codebook.json"),
                "--out", feat_dir, *base]) == 0
    code = run(["predict", "--manifest", small_pipeline["test_manifest"],
                "--features", os.path.join(feat_dir, "features.jsonl"),
                "--model", small_pipeline["model"],
                "--potentials", small_pipeline["potentials"],
                "--out", str(tmp_path / "pred2"), *base])
    assert code == 1


def test_extract_skips_unreadable_image_with_warning(small_pipeline, tmp_path):
    base = small_pipeline["base"]
    manifest_src = small_pipeline["test_manifest"]
    lines = open(manifest_src).read().strip().splitlines()
    records = [json.loads(l) for l in lines]
    src_dir = os.path.dirname(manifest_src)
    records[0]["path"] = "missing.png"  # unreadable: keeps its regions, loses pixels
    broken = tmp_path / "broken.jsonl"
    with open(broken, "w") as fh:
        for record in records:
            if not os.path.isabs(record["path"]) and record["path"] != "missing.png":
                record["path"] = os.path.join(src_dir, record["path"])
            fh.write(json.dumps(record) + "\n")
    out = str(tmp_path / "out")
    assert run(["extract", "--manifest", str(broken),
                "--codebook", small_pipeline["codebook"], "--out", out, *base]) == 0
    cache_lines = open(os.path.join(out, "features.jsonl")).read().strip().splitlines()
    assert len(cache_lines) == 1 + len(records) - 1  # header + all but the broken one
    run_doc = json.loads(open(os.path.join(out, "extract.run.json")).read())
    assert len(run_doc["warnings"]) == 1
    assert records[0]["id"] in run_doc["warnings"][0]


def test_jpeg_images_supported(tmp_path):
    from PIL import Image

    from trendscope.features import load_raster

    rgb = Image.new("RGB", (24, 16), (200, 30, 30))
    path = tmp_path / "img.jpg"
    rgb.save(path, quality=95)
    raster = load_raster(str(path))
    assert raster.width == 24 and raster.height == 16
    assert raster.pixels[0, 0, 0] > 150  # red survives JPEG round-trip


def test_train_holdout_records_ids(small_pipeline, tmp_path):
    root = small_pipeline["root"]
    base = list(small_pipeline["base"])
    config_idx = base.index("--config")
    del base[config_idx:config_idx + 2]  # default holdout applies
    config = str(tmp_path / "conf.txt")
    with open(config, "w") as fh:
        fh.write("codebook_k = 8\n")
    feat = os.path.join(str(root / "feat_train"), "features.jsonl")
    out = str(tmp_path / "model_holdout")
    assert run(["train", "--manifest", small_pipeline["train_manifest"],
                "--features", feat, "--out", out, "--holdout", "0.3",
                "--config", config, *base]) == 0
    held = json.loads(open(os.path.join(out, "holdout_ids.json")).read())
    assert len(held) == int(28 * 0.3)
    run_doc = json.loads(open(os.path.join(out, "train.run.json")).read())
    assert run_doc["config"]["holdout"] == 0.3
