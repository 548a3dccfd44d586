"""Command-line surface: ingest -> codebook -> extract -> train -> eval ->
predict -> trend -> report, plus fixture generation (synth) and a pearson
debug helper.

Exit codes: 0 success, 1 data/model error (diagnostic on stderr), 2 usage.
Every file-producing run writes a ``<command>.run.json`` manifest alongside
its outputs recording inputs, config, seed, and warnings.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import PipelineConfig, load_config
from .crf import read_potentials, write_potentials
from .errors import TrendscopeError
from .evaluate import accuracy_csv, evaluate, summary_line
from .features.cache import read_feature_cache, write_feature_cache
from .features.codebook import read_codebook, write_codebook
from .ingest import corpus_stats, load_manifest, stats_csv
from .pipeline import (
    extract_corpus,
    now_utc,
    predict_pipeline,
    read_predictions,
    split_holdout,
    train_codebook,
    train_pipeline,
    write_predictions,
    write_run_manifest,
)
from .schema import load_default_schema, load_schema_file
from .svm.model import read_model, write_model
from .trend import (
    build_report,
    correlations_csv,
    deltas_csv,
    pearson,
    prevalence,
    report_from_doc,
    report_to_doc,
)

logger = logging.getLogger("trendscope")


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config file (key = value lines)")
    common.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    common.add_argument("--schema", help="attribute schema file (default: bundled 60)")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trendscope",
        description="Clothing-attribute classification and trend analysis pipeline.",
    )
    common = _common_flags()
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="validate a manifest, report counts")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("codebook", parents=[common], help="train the visual-word codebook")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, help="centroid count (default: config codebook_k)")

    p = sub.add_parser("extract", parents=[common], help="extract 72-block features")
    p.add_argument("--manifest", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", parents=[common], help="train per-attribute SVMs + CRF tables")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--holdout", type=float, help="holdout fraction (default: config)")

    p = sub.add_parser("predict", parents=[common], help="decide attributes for a corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--potentials", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--mode",
        choices=("independent", "map", "marginal_threshold"),
        help="decision rule (default: config decode_mode)",
    )

    p = sub.add_parser("eval", parents=[common], help="score predictions against labels")
    p.add_argument("--predictions", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ids", help="file with one image id per line to restrict evaluation")

    p = sub.add_parser("trend", parents=[common], help="build the trend report")
    p.add_argument(
        "--predictions", required=True, nargs="+", help="prediction files covering all four cells"
    )
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", parents=[common], help="render CSV + SVG from a trend report")
    p.add_argument("--trend", required=True, help="trend_report.json from the trend command")
    p.add_argument("--accuracy", help="accuracy.csv to render an accuracy figure from")
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a painted synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--source", choices=("fashion_show", "street_chic"), default="fashion_show")
    p.add_argument("--year", type=int, default=2014)
    p.add_argument("--prefix", default="img")
    p.add_argument(
        "--rate",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a generation rate, e.g. --rate striped_upper=0.5",
    )

    p = sub.add_parser("pearson", parents=[common], help="debug: correlation of two vectors")
    p.add_argument("--xs", required=True, help="comma-separated values")
    p.add_argument("--ys", required=True, help="comma-separated values")

    return parser


def _load_setup(args: argparse.Namespace) -> tuple[PipelineConfig, object]:
    config = load_config(args.config) if args.config else PipelineConfig()
    config.validate()
    schema = load_schema_file(args.schema) if args.schema else load_default_schema()
    return config, schema


def _ensure_out(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def cmd_ingest(args) -> int:
    config, schema = _load_setup(args)
    started = now_utc()
    corpus = load_manifest(args.manifest, schema)
    counts = corpus_stats(corpus)
    out = _ensure_out(args.out)
    stats_path = os.path.join(out, "corpus_stats.csv")
    with open(stats_path, "w", encoding="utf-8") as fh:
        fh.write(stats_csv(counts))
    print(f"{len(corpus)} records ({corpus.fallback_count} grid-fallback)")
    for (source, year), count in sorted(counts.items()):
        print(f"  {source} {year}: {count}")
    write_run_manifest(
        out, "ingest", sys.argv[1:], config, args.seed,
        {"manifest": args.manifest}, [stats_path], started,
    )
    return 0


def cmd_codebook(args) -> int:
    config, schema = _load_setup(args)
    started = now_utc()
    corpus = load_manifest(args.manifest, schema)
    k = args.k or config.codebook_k
    codebook, warnings = train_codebook(corpus, k, args.seed, args.jobs)
    out = _ensure_out(args.out)
    path = os.path.join(out, "codebook.json")
    write_codebook(path, codebook)
    logger.info("codebook: k=%d fingerprint=%s", codebook.k, codebook.fingerprint()[:12])
    write_run_manifest(
        out, "codebook", sys.argv[1:], config, args.seed,
        {"manifest": args.manifest}, [path], started, warnings,
    )
    return 0


def cmd_extract(args) -> int:
    config, schema = _load_setup(args)
    started = now_utc()
    corpus = load_manifest(args.manifest, schema)
    codebook = read_codebook(args.codebook)
    entries, warnings = extract_corpus(corpus, codebook, args.jobs)
    out = _ensure_out(args.out)
    path = os.path.join(out, "features.jsonl")
    write_feature_cache(path, entries, codebook.fingerprint())
    logger.info("extracted %d/%d records", len(entries), len(corpus))
    write_run_manifest(
        out, "extract", sys.argv[1:], config, args.seed,
        {"manifest": args.manifest, "codebook": args.codebook}, [path], started, warnings,
    )
    return 0


def cmd_train(args) -> int:
    config, schema = _load_setup(args)
    if args.holdout is not None:
        config.holdout = args.holdout
        config.validate()
    started = now_utc()
    corpus = load_manifest(args.manifest, schema)
    features_by_id, fingerprint = read_feature_cache(args.features)
    train_records, held_out = split_holdout(corpus, config.holdout, args.seed)
    bundle, potentials = train_pipeline(
        train_records, features_by_id, schema, config, args.seed, fingerprint
    )
    out = _ensure_out(args.out)
    model_path = os.path.join(out, "model.json")
    pots_path = os.path.join(out, "potentials.json")
    write_model(model_path, bundle)
    write_potentials(pots_path, potentials, list(schema.ids))
    outputs = [model_path, pots_path]
    if held_out:
        hold_path = os.path.join(out, "holdout_ids.json")
        with open(hold_path, "w", encoding="utf-8") as fh:
            json.dump(held_out, fh)
            fh.write("\n")
        outputs.append(hold_path)
        logger.info("held out %d records for evaluation", len(held_out))
    write_run_manifest(
        out, "train", sys.argv[1:], config, args.seed,
        {"manifest": args.manifest, "features": args.features}, outputs, started,
    )
    return 0


def cmd_predict(args) -> int:
    config, schema = _load_setup(args)
    started = now_utc()
    corpus = load_manifest(args.manifest, schema)
    bundle = read_model(args.model)
    if bundle.schema_version != schema.version:
        raise TrendscopeError(
            f"model schema {bundle.schema_version!r} does not match {schema.version!r}"
        )
    potentials, _pot_ids = read_potentials(args.potentials)
    features_by_id, _ = read_feature_cache(args.features, bundle.codebook_fingerprint)
    mode = args.mode or config.decode_mode
    decisions, probs = predict_pipeline(
        bundle, potentials, corpus.records, features_by_id, schema, config, mode
    )
    out = _ensure_out(args.out)
    path = os.path.join(out, "predictions.jsonl")
    write_predictions(path, corpus.records, decisions, probs, schema.version, mode)
    write_run_manifest(
        out, "predict", sys.argv[1:], config, args.seed,
        {
            "manifest": args.manifest,
            "features": args.features,
            "model": args.model,
            "potentials": args.potentials,
        },
        [path], started,
    )
    return 0


def cmd_eval(args) -> int:
    config, schema = _load_setup(args)
    started = now_utc()
    corpus = load_manifest(args.manifest, schema)
    _header, rows = read_predictions(args.predictions)
    keep = None
    if args.ids:
        with open(args.ids, encoding="utf-8") as fh:
            text = fh.read()
        try:
            keep = set(json.loads(text))
        except json.JSONDecodeError:
            keep = {line.strip() for line in text.splitlines() if line.strip()}
    predictions = {
        row["id"]: {a: int(v) for a, v in row["decisions"].items()}
        for row in rows
        if keep is None or row["id"] in keep
    }
    report = evaluate(predictions, corpus, schema)
    out = _ensure_out(args.out)
    path = os.path.join(out, "accuracy.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(accuracy_csv(report))
    print(summary_line(report))
    write_run_manifest(
        out, "eval", sys.argv[1:], config, args.seed,
        {"predictions": args.predictions, "manifest": args.manifest}, [path], started,
    )
    return 0


def cmd_trend(args) -> int:
    config, schema = _load_setup(args)
    started = now_utc()
    cells: dict[tuple[str, int], dict[str, dict[str, int]]] = {}
    for path in args.predictions:
        _header, rows = read_predictions(path)
        for row in rows:
            key = (row["source"], row["year"])
            cells.setdefault(key, {})[row["id"]] = row["decisions"]
    sources = {source for source, _ in cells}
    years = sorted({year for _, year in cells})
    if sources != {"fashion_show", "street_chic"} or len(years) != 2:
        raise TrendscopeError(
            f"trend needs both sources over exactly two years; got {sorted(cells)}"
        )
    tables = {
        key: prevalence(decisions, key[0], key[1], schema) for key, decisions in cells.items()
    }
    report = build_report(
        tables[("fashion_show", years[0])],
        tables[("fashion_show", years[1])],
        tables[("street_chic", years[0])],
        tables[("street_chic", years[1])],
        schema,
        sign_threshold=config.sign_threshold,
    )
    out = _ensure_out(args.out)
    path = os.path.join(out, "trend_report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_doc(report), fh)
        fh.write("\n")
    for category, trend in report.categories.items():
        r_text = f"{trend.r:.4f}" if trend.r is not None else "undefined"
        print(f"{category}: r = {r_text} over {len(trend.attribute_ids)} attributes")
    write_run_manifest(
        out, "trend", sys.argv[1:], config, args.seed,
        {f"predictions{i}": p for i, p in enumerate(args.predictions)}, [path], started,
    )
    return 0


def cmd_report(args) -> int:
    from . import figures  # deferred: pulls in matplotlib

    config, _schema = _load_setup(args)
    started = now_utc()
    try:
        with open(args.trend, encoding="utf-8") as fh:
            report = report_from_doc(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise TrendscopeError(f"cannot read trend report {args.trend}: {exc}") from exc
    out = _ensure_out(args.out)
    deltas_path = os.path.join(out, "trend_deltas.csv")
    with open(deltas_path, "w", encoding="utf-8") as fh:
        fh.write(deltas_csv(report))
    corr_path = os.path.join(out, "trend_correlations.csv")
    with open(corr_path, "w", encoding="utf-8") as fh:
        fh.write(correlations_csv(report))
    outputs = [deltas_path, corr_path]
    outputs.extend(figures.render_trend_figures(report, out))
    summary_path = os.path.join(out, "summary.txt")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(f"trend report {report.years[0]} -> {report.years[1]}\n")
        for category, trend in report.categories.items():
            r_text = f"{trend.r:.4f}" if trend.r is not None else "undefined"
            correlated = sum(1 for a in trend.agreement if a == "correlated")
            fh.write(
                f"{category}: r = {r_text}; {correlated}/{len(trend.agreement)} "
                "attributes move together\n"
            )
    outputs.append(summary_path)
    inputs = {"trend": args.trend}
    if args.accuracy:
        from .evaluate import AccuracyReport, AttributeAccuracy

        entries = {}
        with open(args.accuracy, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#") or line.startswith("attribute,"):
                    continue
                attr_id, support, accuracy = line.split(",")
                entries[attr_id] = AttributeAccuracy(
                    attr_id, int(support), round(float(accuracy) * int(support)), float(accuracy)
                )
        overall = sum(e.accuracy for e in entries.values()) / len(entries) if entries else 0.0
        acc_report = AccuracyReport(per_attribute=entries, overall=overall)
        fig_path = os.path.join(out, "accuracy.svg")
        outputs.append(figures.render_accuracy_figure(acc_report, fig_path))
        inputs["accuracy"] = args.accuracy
    write_run_manifest(out, "report", sys.argv[1:], config, args.seed, inputs, outputs, started)
    return 0


def cmd_synth(args) -> int:
    from .synth import SynthRates, generate_corpus

    config, _schema = _load_setup(args)
    started = now_utc()
    overrides = {}
    for item in args.rate:
        if "=" not in item:
            raise TrendscopeError(f"--rate expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        try:
            overrides[key.strip()] = float(value)
        except ValueError as exc:
            raise TrendscopeError(f"--rate {item!r}: value must be a number") from exc
    try:
        rates = SynthRates(**overrides)
    except TypeError as exc:
        raise TrendscopeError(f"unknown rate key in {sorted(overrides)}") from exc
    manifest = generate_corpus(
        args.out, args.count, args.seed,
        source=args.source, year=args.year, rates=rates, id_prefix=args.prefix,
    )
    print(manifest)
    write_run_manifest(
        args.out, "synth", sys.argv[1:], config, args.seed, {}, [manifest], started,
    )
    return 0


def cmd_pearson(args) -> int:
    try:
        xs = [float(v) for v in args.xs.split(",") if v.strip()]
        ys = [float(v) for v in args.ys.split(",") if v.strip()]
    except ValueError as exc:
        raise TrendscopeError(f"--xs/--ys must be comma-separated numbers: {exc}") from exc
    r = pearson(xs, ys)
    print("undefined" if r is None else repr(r))
    return 0


_HANDLERS = {
    "ingest": cmd_ingest,
    "codebook": cmd_codebook,
    "extract": cmd_extract,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "trend": cmd_trend,
    "report": cmd_report,
    "synth": cmd_synth,
    "pearson": cmd_pearson,
}


def run(argv: list[str]) -> int:
    """Entry point; returns the process exit code (0 ok, 1 data error, 2 usage)."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors
        return int(exc.code) if exc.code is not None else 2
    try:
        return _HANDLERS[args.command](args)
    except TrendscopeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
