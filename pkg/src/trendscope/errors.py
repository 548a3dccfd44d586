"""Exception hierarchy. Every data/model failure raised by the library derives
from TrendscopeError so the CLI can map it to a single exit code."""


class TrendscopeError(Exception):
    """Base class for all errors raised by trendscope."""


class SchemaError(TrendscopeError):
    """Invalid attribute schema text or schema constraint violation."""


class ManifestError(TrendscopeError):
    """Malformed corpus manifest or record-level validation failure."""


class FeatureError(TrendscopeError):
    """Feature extraction failure (bad region, dimension mismatch, cache)."""


class ModelError(TrendscopeError):
    """SVM training/prediction failure or model bundle inconsistency."""


class InferenceError(TrendscopeError):
    """CRF construction or inference failure."""


class ReportError(TrendscopeError):
    """Evaluation or trend report construction failure."""
