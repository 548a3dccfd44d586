"""Chi-square-kernel SVMs: one binary classifier per attribute with per-block
feature weighting and Platt-calibrated probabilities."""

from .kernels import (
    KernelSpec,
    auto_gamma,
    block_distance_matrices,
    block_matrices,
    chi2_block_kernel,
    chi2_distance,
    combined_gram,
    combined_kernel,
    gram_matrix,
    uniform_weights,
)
from .model import (
    AttributeClassifier,
    ModelBundle,
    balanced_c,
    block_weights,
    block_weights_from_kernels,
    bundle_margins,
    bundle_probs,
    normalize_weights,
    predict_margin,
    predict_prob,
    read_model,
    stratified_folds,
    train_attribute_classifier,
    write_model,
)
from .platt import platt_fit, platt_prob
from .smo import dual_objective, train_smo

__all__ = [
    "AttributeClassifier",
    "KernelSpec",
    "ModelBundle",
    "auto_gamma",
    "balanced_c",
    "block_distance_matrices",
    "block_matrices",
    "block_weights",
    "block_weights_from_kernels",
    "bundle_margins",
    "bundle_probs",
    "chi2_block_kernel",
    "chi2_distance",
    "combined_gram",
    "combined_kernel",
    "dual_objective",
    "gram_matrix",
    "normalize_weights",
    "platt_fit",
    "platt_prob",
    "predict_margin",
    "predict_prob",
    "read_model",
    "stratified_folds",
    "train_attribute_classifier",
    "train_smo",
    "uniform_weights",
    "write_model",
]
