"""trendscope: clothing-attribute classification and fashion-trend analytics.

A batch pipeline that learns binary clothing attributes from body-part
histogram features with chi-square-kernel SVMs, refines the joint decisions
with a fully-connected pairwise CRF, and compares attribute prevalence
trends between runway and street-photo corpora.
"""

from .config import PipelineConfig, load_config, parse_config
from .crf import (
    CRFInstance,
    InferenceResult,
    PairwisePotentials,
    decode,
    energy,
    fit_pairwise,
    infer_exact,
    infer_map_icm,
    infer_marginals_lbp,
)
from .errors import (
    FeatureError,
    InferenceError,
    ManifestError,
    ModelError,
    ReportError,
    SchemaError,
    TrendscopeError,
)
from .evaluate import AccuracyReport, accuracy_csv, evaluate, summary_line
from .ingest import (
    PARTS,
    Corpus,
    ImageRecord,
    PartRegion,
    corpus_stats,
    default_part_regions,
    load_manifest,
)
from .schema import (
    Attribute,
    AttributeSchema,
    classic_ids,
    load_default_schema,
    load_schema,
    load_schema_file,
    serialize_schema,
)
from .trend import (
    PrevalenceTable,
    TrendDelta,
    TrendReport,
    build_report,
    deltas,
    pearson,
    prevalence,
)

__version__ = "0.1.0"
