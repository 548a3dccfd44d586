"""End-to-end orchestration shared by the CLI: parallel feature extraction,
attribute training, joint decoding, prediction files, and run manifests."""

from __future__ import annotations

import datetime
import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

from .config import PipelineConfig
from .crf import PairwisePotentials, decode, fit_pairwise
from .errors import FeatureError, ModelError, TrendscopeError
from .features.cache import read_feature_cache, write_feature_cache
from .features.channels import BodyFeatures, extract_all, luma
from .features.codebook import Codebook, dense_descriptors, train_from_descriptors
from .features.raster import load_raster
from .ingest import Corpus, ImageRecord
from .schema import AttributeSchema
from .seeds import derive_rng
from .svm.kernels import auto_gamma, block_distance_matrices, block_matrices
from .svm.model import ModelBundle, bundle_margins, train_attribute_classifier
from .svm.platt import platt_prob

logger = logging.getLogger("trendscope")

_WORKER_CODEBOOK: Codebook | None = None


def _init_worker(codebook: Codebook | None) -> None:
    global _WORKER_CODEBOOK
    _WORKER_CODEBOOK = codebook


def _extract_one(record: ImageRecord) -> tuple[str, BodyFeatures | None, str | None]:
    try:
        raster = load_raster(record.path)
        features = extract_all(raster, record.regions, _WORKER_CODEBOOK)
        return record.id, features, None
    except FeatureError as exc:
        return record.id, None, str(exc)


def _descriptors_one(record: ImageRecord) -> tuple[str, np.ndarray | None, str | None]:
    try:
        raster = load_raster(record.path)
        parts = [dense_descriptors(luma(raster.crop(region))) for region in record.regions]
        parts = [p for p in parts if p.shape[0]]
        merged = np.concatenate(parts) if parts else np.zeros((0, 128))
        return record.id, merged, None
    except FeatureError as exc:
        return record.id, None, str(exc)


def _pmap(fn: Callable, items: Sequence, jobs: int, codebook: Codebook | None) -> list:
    """Order-preserving map, optionally across processes. Results are reduced
    in input order so any jobs value yields identical output."""
    if jobs <= 1:
        _init_worker(codebook)
        return [fn(item) for item in items]
    with ProcessPoolExecutor(
        max_workers=jobs, initializer=_init_worker, initargs=(codebook,)
    ) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (jobs * 4) or 1)))


def extract_corpus(
    corpus: Corpus, codebook: Codebook, jobs: int = 1
) -> tuple[list[tuple[str, BodyFeatures]], list[str]]:
    """Features for every readable record; returns (entries, warnings).

    Decode failures skip the record with a warning rather than aborting."""
    results = _pmap(_extract_one, corpus.records, jobs, codebook)
    entries = []
    warnings = []
    for image_id, features, error in results:
        if error is not None:
            warnings.append(f"skipped {image_id}: {error}")
        else:
            entries.append((image_id, features))
    return entries, warnings


def corpus_descriptors(corpus: Corpus, jobs: int = 1) -> tuple[np.ndarray, list[str]]:
    results = _pmap(_descriptors_one, corpus.records, jobs, None)
    chunks = []
    warnings = []
    for image_id, descriptors, error in results:
        if error is not None:
            warnings.append(f"skipped {image_id}: {error}")
        elif descriptors.shape[0]:
            chunks.append(descriptors)
    if not chunks:
        raise FeatureError("no descriptors found in the corpus")
    return np.concatenate(chunks), warnings


def train_codebook(corpus: Corpus, k: int, seed: int, jobs: int = 1) -> tuple[Codebook, list[str]]:
    descriptors, warnings = corpus_descriptors(corpus, jobs)
    codebook = train_from_descriptors(descriptors, k, seed, corpus.fingerprint())
    return codebook, warnings


def split_holdout(
    corpus: Corpus, fraction: float, seed: int
) -> tuple[list[ImageRecord], list[str]]:
    """Seeded holdout split; returns (training records, held-out ids)."""
    records = list(corpus.records)
    if fraction <= 0:
        return records, []
    rng = derive_rng(seed, "holdout")
    perm = rng.permutation(len(records))
    n_hold = int(len(records) * fraction)
    hold_idx = set(int(i) for i in perm[:n_hold])
    train = [r for i, r in enumerate(records) if i not in hold_idx]
    held = [records[i].id for i in sorted(hold_idx)]
    if not train:
        raise TrendscopeError("holdout fraction leaves no training records")
    return train, held


def train_pipeline(
    records: Sequence[ImageRecord],
    features_by_id: dict[str, BodyFeatures],
    schema: AttributeSchema,
    config: PipelineConfig,
    seed: int,
    codebook_fingerprint: str,
) -> tuple[ModelBundle, PairwisePotentials]:
    """Train one classifier per schema attribute plus the pairwise tables."""
    usable = [r for r in records if r.id in features_by_id]
    if not usable:
        raise ModelError("no training records have extracted features")
    ids = [r.id for r in usable]
    features = [features_by_id[r.id] for r in usable]

    gamma = config.gamma
    if gamma <= 0:
        gamma = auto_gamma(features, derive_rng(seed, "gamma"))
    logger.info("kernel bandwidth gamma=%.6g", gamma)

    distances = block_distance_matrices(block_matrices(features))
    block_kernels = [np.exp(-gamma * d) for d in distances]

    classifiers = {}
    for attr_id in schema.ids:
        labeled = [i for i, r in enumerate(usable) if r.labels and attr_id in r.labels]
        if not labeled:
            raise ModelError(f"no labeled examples for attribute {attr_id!r}")
        y = np.array([1.0 if usable[i].labels[attr_id] else -1.0 for i in labeled])
        if min(int((y == 1).sum()), int((y == -1).sum())) < config.folds:
            raise ModelError(
                f"attribute {attr_id!r} needs at least {config.folds} examples per class"
            )
        if len(labeled) == len(usable):
            kernels = block_kernels
            sub_ids, sub_features = ids, features
        else:
            sel = np.array(labeled)
            kernels = [k[np.ix_(sel, sel)] for k in block_kernels]
            sub_ids = [ids[i] for i in labeled]
            sub_features = [features[i] for i in labeled]
        classifiers[attr_id] = train_attribute_classifier(
            attr_id,
            sub_ids,
            sub_features,
            y,
            gamma,
            config.c_param,
            config.folds,
            derive_rng(seed, f"weights:{attr_id}"),
            block_kernels=kernels,
            tol=config.smo_tol,
        )
        logger.info(
            "trained %s: %d support vectors", attr_id, len(classifiers[attr_id].support_ids)
        )

    complete = [
        r for r in usable if r.labels and all(a in r.labels for a in schema.ids)
    ]
    if not complete:
        raise ModelError("no records carry complete labels for pairwise fitting")
    label_matrix = np.array([[r.labels[a] for a in schema.ids] for r in complete])
    potentials = fit_pairwise(label_matrix, config.alpha)

    bundle = ModelBundle(
        schema_version=schema.version,
        codebook_fingerprint=codebook_fingerprint,
        classifiers=classifiers,
    )
    return bundle, potentials


def predict_pipeline(
    bundle: ModelBundle,
    potentials: PairwisePotentials,
    records: Sequence[ImageRecord],
    features_by_id: dict[str, BodyFeatures],
    schema: AttributeSchema,
    config: PipelineConfig,
    mode: str | None = None,
) -> tuple[dict[str, dict[str, int]], dict[str, dict[str, float]]]:
    """Calibrated probabilities plus joint decisions for every record."""
    mode = mode or config.decode_mode
    usable = [r for r in records if r.id in features_by_id]
    if not usable:
        raise ModelError("no records have extracted features")
    ids = [r.id for r in usable]
    features = [features_by_id[r.id] for r in usable]
    margins = bundle_margins(bundle, ids, features)
    attr_ids = list(schema.ids)
    prob_matrix = np.column_stack(
        [
            platt_prob(margins[a], bundle.classifiers[a].platt_a, bundle.classifiers[a].platt_b)
            for a in attr_ids
        ]
    )
    decisions: dict[str, dict[str, int]] = {}
    probs: dict[str, dict[str, float]] = {}
    for row, image_id in enumerate(ids):
        p = prob_matrix[row]
        if mode == "independent":
            decided = (p > 0.5).astype(int)
        else:
            decided = decode(
                p,
                potentials,
                mode=mode,
                pairwise_scale=config.pairwise_scale,
                max_iters=config.lbp_max_iters,
                damping=config.damping,
                tol=config.lbp_tol,
            )
        decisions[image_id] = {a: int(v) for a, v in zip(attr_ids, decided)}
        probs[image_id] = {a: float(v) for a, v in zip(attr_ids, p)}
    return decisions, probs


# ---------------------------------------------------------------------------
# prediction files and run manifests


def write_predictions(
    path: str,
    records: Sequence[ImageRecord],
    decisions: dict[str, dict[str, int]],
    probs: dict[str, dict[str, float]],
    schema_version: str,
    mode: str,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "format": "trendscope.predictions",
            "version": 1,
            "schema_version": schema_version,
            "mode": mode,
        }
        fh.write(json.dumps(header) + "\n")
        for record in records:
            if record.id not in decisions:
                continue
            fh.write(
                json.dumps(
                    {
                        "id": record.id,
                        "source": record.source,
                        "year": record.year,
                        "decisions": decisions[record.id],
                        "probs": probs.get(record.id, {}),
                    }
                )
                + "\n"
            )


def read_predictions(path: str) -> tuple[dict, list[dict]]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [line for line in fh if line.strip()]
    except OSError as exc:
        raise TrendscopeError(f"cannot read predictions {path}: {exc}") from exc
    if not lines:
        raise TrendscopeError(f"predictions file {path} is empty")
    header = json.loads(lines[0])
    if header.get("format") != "trendscope.predictions" or header.get("version") != 1:
        raise TrendscopeError(f"{path} is not a trendscope predictions file (v1)")
    return header, [json.loads(line) for line in lines[1:]]


def file_fingerprint(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_run_manifest(
    out_dir: str,
    command: str,
    argv: Sequence[str],
    config: PipelineConfig,
    seed: int,
    inputs: dict[str, str],
    outputs: Iterable[str],
    started: str,
    warnings: Sequence[str] = (),
) -> str:
    """Record everything needed to replay a run next to its outputs."""
    doc = {
        "format": "trendscope.run",
        "version": 1,
        "command": command,
        "argv": list(argv),
        "seed": seed,
        "config": config.snapshot(),
        "inputs": {
            name: {"path": path, "sha256": file_fingerprint(path)}
            for name, path in inputs.items()
            if os.path.exists(path)
        },
        "outputs": sorted(outputs),
        "warnings": list(warnings),
        "started": started,
        "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = os.path.join(out_dir, f"{command}.run.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return path


def now_utc() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


__all__ = [
    "corpus_descriptors",
    "extract_corpus",
    "file_fingerprint",
    "now_utc",
    "predict_pipeline",
    "read_feature_cache",
    "read_predictions",
    "split_holdout",
    "train_codebook",
    "train_pipeline",
    "write_feature_cache",
    "write_predictions",
    "write_run_manifest",
]
