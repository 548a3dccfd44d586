"""Pipeline configuration.

Config files are line-oriented ``key = value`` text; blank lines and lines
starting with '#' are ignored, unknown keys are rejected. CLI flags override
file values, which override the defaults below.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .errors import TrendscopeError


@dataclass
class PipelineConfig:
    c_param: float = 1.0          # SVM box constraint (per-class scaled)
    folds: int = 3                # cross-validation folds for block weights
    smo_tol: float = 1e-3         # SMO stopping tolerance
    gamma: float = 0.0            # kernel bandwidth; 0 = 1/mean-distance heuristic
    codebook_k: int = 64          # visual-word count
    alpha: float = 1.0            # CRF co-occurrence smoothing
    pairwise_scale: float = 1.0   # CRF pairwise strength vs SVM evidence
    damping: float = 0.5          # LBP message damping
    lbp_max_iters: int = 200
    lbp_tol: float = 1e-5
    decode_mode: str = "map"      # "map" | "marginal_threshold" | "independent"
    sign_threshold: float = 0.01  # |delta| floor for trend sign agreement
    holdout: float = 0.3          # seeded holdout fraction recorded at training

    def validate(self) -> None:
        if self.c_param <= 0:
            raise TrendscopeError("c_param must be positive")
        if self.folds < 2:
            raise TrendscopeError("folds must be at least 2")
        if self.codebook_k < 2:
            raise TrendscopeError("codebook_k must be at least 2")
        if not 0.0 <= self.holdout < 1.0:
            raise TrendscopeError("holdout must be in [0, 1)")
        if self.decode_mode not in ("map", "marginal_threshold", "independent"):
            raise TrendscopeError(f"unknown decode_mode {self.decode_mode!r}")
        if not 0.0 <= self.damping < 1.0:
            raise TrendscopeError("damping must be in [0, 1)")

    def snapshot(self) -> dict:
        return asdict(self)


def load_config(path: str) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise TrendscopeError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def parse_config(text: str) -> PipelineConfig:
    known = {f.name: f.type for f in fields(PipelineConfig)}
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise TrendscopeError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise TrendscopeError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise TrendscopeError(f"config line {lineno}: repeated key {key!r}")
        values[key] = _coerce(key, value, lineno)
    config = PipelineConfig(**values)
    config.validate()
    return config


def _coerce(key: str, value: str, lineno: int) -> object:
    default = getattr(PipelineConfig(), key)
    try:
        if isinstance(default, bool):
            return value.lower() in ("true", "1", "yes")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        return value
    except ValueError as exc:
        raise TrendscopeError(f"config line {lineno}: bad value for {key}: {value!r}") from exc
