"""Per-attribute classifiers: block weighting, training, prediction, and the
serialized model bundle.

Block weights come from per-block cross-validated accuracy: a block-only SVM
is scored per fold, blocks at or below chance get zero weight, and the
above-chance margins are L1-normalized (uniform fallback when every block is
at chance). Class imbalance is handled by scaling each class's box constraint
proportionally to the inverse class frequency, normalized so the larger
penalty equals c_param.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ModelError
from ..features.channels import BodyFeatures, FeatureBlock
from .kernels import (
    KernelSpec,
    block_distance_matrices,
    block_matrices,
    chi2_block_kernel,
    uniform_weights,
)
from .platt import platt_fit, platt_prob
from .smo import train_smo

SV_EPS = 1e-12  # alpha below this is not a support vector


@dataclass(frozen=True)
class AttributeClassifier:
    attribute_id: str
    kernel: KernelSpec
    support_ids: tuple[str, ...]
    support_features: tuple[BodyFeatures, ...]
    dual_coefs: np.ndarray
    bias: float
    platt_a: float
    platt_b: float
    c_param: float

    def __post_init__(self) -> None:
        if len(self.support_ids) != len(self.support_features) or len(
            self.support_ids
        ) != self.dual_coefs.shape[0]:
            raise ModelError(f"{self.attribute_id}: support vector arrays disagree in length")
        if np.any(np.abs(self.dual_coefs) > self.c_param * (1 + 1e-9)):
            raise ModelError(f"{self.attribute_id}: dual coefficients exceed the box constraint")
        if abs(float(self.dual_coefs.sum())) > 1e-6:
            raise ModelError(f"{self.attribute_id}: dual coefficients do not sum to zero")


@dataclass(frozen=True)
class ModelBundle:
    schema_version: str
    codebook_fingerprint: str
    classifiers: dict[str, AttributeClassifier]

    def __post_init__(self) -> None:
        for attr_id, clf in self.classifiers.items():
            if clf.attribute_id != attr_id:
                raise ModelError(f"classifier keyed {attr_id!r} claims {clf.attribute_id!r}")


def balanced_c(labels: np.ndarray, c_param: float) -> np.ndarray:
    """Per-example C, inverse to class frequency, max equal to c_param."""
    y = np.asarray(labels)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == -1))
    larger = max(n_pos, n_neg)
    c_pos = c_param * n_neg / larger
    c_neg = c_param * n_pos / larger
    return np.where(y == 1, c_pos, c_neg)


def normalize_weights(raw: np.ndarray) -> np.ndarray:
    """L1-normalize non-negative raw weights; uniform when all are zero."""
    raw = np.asarray(raw, dtype=float)
    if np.any(raw < 0):
        raise ModelError("raw weights must be non-negative")
    total = raw.sum()
    if total <= 0:
        return uniform_weights()
    return raw / total


def stratified_folds(labels: np.ndarray, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold id per example; each class is dealt round-robin after a shuffle."""
    y = np.asarray(labels)
    assignment = np.zeros(y.shape[0], dtype=int)
    for cls in (1, -1):
        idx = np.flatnonzero(y == cls)
        if idx.shape[0] < folds:
            raise ModelError(f"need at least {folds} examples of class {cls}")
        perm = rng.permutation(idx.shape[0])
        assignment[idx[perm]] = np.arange(idx.shape[0]) % folds
    return assignment


def block_weights_from_kernels(
    block_kernels: Sequence[np.ndarray],
    labels: np.ndarray,
    folds: int,
    c_param: float,
    rng: np.random.Generator,
    tol: float = 1e-3,
) -> np.ndarray:
    """Cross-validated above-chance accuracy per block, L1-normalized."""
    y = np.asarray(labels, dtype=float)
    fold_of = stratified_folds(y, folds, rng)
    raw = np.zeros(len(block_kernels))
    for b, kernel in enumerate(block_kernels):
        correct = 0
        for fold in range(folds):
            train = fold_of != fold
            val = ~train
            sub = kernel[np.ix_(train, train)]
            try:
                dual, bias = train_smo(sub, y[train], balanced_c(y[train], c_param), tol)
            except ModelError:
                continue  # degenerate fold counts as chance
            margins = kernel[np.ix_(val, train)] @ dual + bias
            predictions = np.where(margins > 0, 1.0, -1.0)
            correct += int(np.sum(predictions == y[val]))
        accuracy = correct / y.shape[0]
        raw[b] = max(accuracy - 0.5, 0.0)
    return normalize_weights(raw)


def block_weights(
    features: Sequence[BodyFeatures],
    labels: np.ndarray,
    folds: int,
    gamma: float,
    c_param: float,
    rng: np.random.Generator,
) -> np.ndarray:
    distances = block_distance_matrices(block_matrices(features))
    kernels = [np.exp(-gamma * d) for d in distances]
    return block_weights_from_kernels(kernels, labels, folds, c_param, rng)


def train_attribute_classifier(
    attribute_id: str,
    ids: Sequence[str],
    features: Sequence[BodyFeatures],
    labels: np.ndarray,
    gamma: float,
    c_param: float,
    folds: int,
    rng: np.random.Generator,
    block_kernels: Sequence[np.ndarray] | None = None,
    tol: float = 1e-3,
) -> AttributeClassifier:
    """Weights -> SMO -> Platt for one attribute.

    block_kernels, when given, are the precomputed per-block kernel matrices
    of the training set (shared across attributes by the pipeline).
    """
    y = np.asarray(labels, dtype=float)
    if block_kernels is None:
        distances = block_distance_matrices(block_matrices(features))
        block_kernels = [np.exp(-gamma * d) for d in distances]
    weights = block_weights_from_kernels(block_kernels, y, folds, c_param, rng, tol)
    spec = KernelSpec(gamma=gamma, block_weights=weights)

    gram = np.zeros_like(block_kernels[0])
    for w, kernel in zip(weights, block_kernels):
        if w > 0:
            gram += w * kernel
    dual, bias = train_smo(gram, y, balanced_c(y, c_param), tol)
    margins = gram @ dual + bias
    platt_a, platt_b = platt_fit(margins, y)

    keep = np.abs(dual) > SV_EPS
    return AttributeClassifier(
        attribute_id=attribute_id,
        kernel=spec,
        support_ids=tuple(np.asarray(ids, dtype=object)[keep]),
        support_features=tuple(f for f, k in zip(features, keep) if k),
        dual_coefs=dual[keep],
        bias=float(bias),
        platt_a=platt_a,
        platt_b=platt_b,
        c_param=float(c_param),
    )


def _check_fingerprints(clf: AttributeClassifier, x: BodyFeatures) -> None:
    model_fp = next(
        (f.codebook_fingerprint for f in clf.support_features if f.codebook_fingerprint),
        None,
    )
    if model_fp and x.codebook_fingerprint and model_fp != x.codebook_fingerprint:
        raise ModelError(
            f"{clf.attribute_id}: feature codebook {x.codebook_fingerprint[:12]} does not "
            f"match model codebook {model_fp[:12]}"
        )


def predict_margin(clf: AttributeClassifier, x: BodyFeatures) -> float:
    """Decision value f(x) = sum_i dual_i * k(s_i, x) + bias."""
    _check_fingerprints(clf, x)
    margin = clf.bias
    for coef, sv in zip(clf.dual_coefs, clf.support_features):
        value = 0.0
        for w, block_s, block_x in zip(clf.kernel.block_weights, sv.blocks, x.blocks):
            if w > 0:
                value += float(w) * chi2_block_kernel(
                    block_s.histogram, block_x.histogram, clf.kernel.gamma
                )
        margin += float(coef) * value
    return float(margin)


def predict_prob(clf: AttributeClassifier, x: BodyFeatures) -> float:
    return float(platt_prob(predict_margin(clf, x), clf.platt_a, clf.platt_b))


def bundle_margins(
    bundle: ModelBundle, ids: Sequence[str], features: Sequence[BodyFeatures]
) -> dict[str, np.ndarray]:
    """Margins for many images at once, sharing per-block distance work.

    Returns {attribute_id: margins aligned with ids}.
    """
    for f in features:
        if f.codebook_fingerprint and f.codebook_fingerprint != bundle.codebook_fingerprint:
            raise ModelError("feature codebook fingerprint does not match the model bundle")
    pool_ids: list[str] = []
    pool_pos: dict[str, int] = {}
    pool_features: list[BodyFeatures] = []
    for clf in bundle.classifiers.values():
        for sid, sf in zip(clf.support_ids, clf.support_features):
            if sid not in pool_pos:
                pool_pos[sid] = len(pool_ids)
                pool_ids.append(sid)
                pool_features.append(sf)
    distances = block_distance_matrices(block_matrices(features), block_matrices(pool_features))
    kernel_cache: dict[float, list[np.ndarray]] = {}
    margins: dict[str, np.ndarray] = {}
    for attr_id, clf in bundle.classifiers.items():
        gamma = clf.kernel.gamma
        if gamma not in kernel_cache:
            kernel_cache[gamma] = [np.exp(-gamma * d) for d in distances]
        cross = combined_gram_cached(kernel_cache[gamma], clf.kernel.block_weights)
        cols = [pool_pos[sid] for sid in clf.support_ids]
        margins[attr_id] = cross[:, cols] @ clf.dual_coefs + clf.bias
    return margins


def combined_gram_cached(kernels: list[np.ndarray], weights: np.ndarray) -> np.ndarray:
    gram = np.zeros_like(kernels[0])
    for w, kernel in zip(weights, kernels):
        if w > 0:
            gram += w * kernel
    return gram


def bundle_probs(
    bundle: ModelBundle, ids: Sequence[str], features: Sequence[BodyFeatures]
) -> dict[str, np.ndarray]:
    margins = bundle_margins(bundle, ids, features)
    return {
        attr_id: platt_prob(m, bundle.classifiers[attr_id].platt_a, bundle.classifiers[attr_id].platt_b)
        for attr_id, m in margins.items()
    }


# ---------------------------------------------------------------------------
# model bundle file


def _features_doc(features: BodyFeatures) -> list:
    return [
        [b.part, b.channel, b.aggregation, int(b.histogram.shape[0]), bool(b.empty),
         [float(v) for v in b.histogram]]
        for b in features.blocks
    ]


def _features_from_doc(doc: list, fingerprint: str | None) -> BodyFeatures:
    blocks = tuple(
        FeatureBlock(part, channel, agg, np.array(values, dtype=float), empty)
        for part, channel, agg, _dim, empty, values in doc
    )
    return BodyFeatures(blocks=blocks, codebook_fingerprint=fingerprint)


def write_model(path: str, bundle: ModelBundle) -> None:
    """Serialize a bundle; support-vector features are stored once in a shared
    pool and referenced by id. Floats round-trip exactly via repr."""
    pool: dict[str, BodyFeatures] = {}
    classifiers = []
    for clf in bundle.classifiers.values():
        for sid, sf in zip(clf.support_ids, clf.support_features):
            pool.setdefault(sid, sf)
        classifiers.append(
            {
                "attribute_id": clf.attribute_id,
                "gamma": clf.kernel.gamma,
                "block_weights": [float(w) for w in clf.kernel.block_weights],
                "support_ids": list(clf.support_ids),
                "dual_coefs": [float(v) for v in clf.dual_coefs],
                "bias": clf.bias,
                "platt_a": clf.platt_a,
                "platt_b": clf.platt_b,
                "c_param": clf.c_param,
            }
        )
    doc = {
        "format": "trendscope.model",
        "version": 1,
        "schema_version": bundle.schema_version,
        "codebook_fingerprint": bundle.codebook_fingerprint,
        "classifiers": classifiers,
        "feature_pool": {sid: _features_doc(f) for sid, f in pool.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def read_model(path: str) -> ModelBundle:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read model bundle {path}: {exc}") from exc
    if doc.get("format") != "trendscope.model" or doc.get("version") != 1:
        raise ModelError(f"{path} is not a trendscope model bundle (v1)")
    fingerprint = doc["codebook_fingerprint"]
    pool = {
        sid: _features_from_doc(fdoc, fingerprint) for sid, fdoc in doc["feature_pool"].items()
    }
    classifiers: dict[str, AttributeClassifier] = {}
    for cdoc in doc["classifiers"]:
        support_ids = tuple(cdoc["support_ids"])
        try:
            support_features = tuple(pool[sid] for sid in support_ids)
        except KeyError as exc:
            raise ModelError(f"{path}: support vector {exc} missing from feature pool") from exc
        clf = AttributeClassifier(
            attribute_id=cdoc["attribute_id"],
            kernel=KernelSpec(
                gamma=float(cdoc["gamma"]),
                block_weights=np.array(cdoc["block_weights"], dtype=float),
            ),
            support_ids=support_ids,
            support_features=support_features,
            dual_coefs=np.array(cdoc["dual_coefs"], dtype=float),
            bias=float(cdoc["bias"]),
            platt_a=float(cdoc["platt_a"]),
            platt_b=float(cdoc["platt_b"]),
            c_param=float(cdoc["c_param"]),
        )
        if clf.attribute_id in classifiers:
            raise ModelError(f"{path}: duplicate classifier for {clf.attribute_id!r}")
        classifiers[clf.attribute_id] = clf
    return ModelBundle(
        schema_version=doc["schema_version"],
        codebook_fingerprint=fingerprint,
        classifiers=classifiers,
    )
