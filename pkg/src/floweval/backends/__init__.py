"""OCR and visual-entailment clients, batching, caching, and oracle doubles."""

from floweval.backends.base import (
    BackendConfig,
    BackendError,
    EntailmentVerdict,
    ImageRef,
    VisionBackend,
)
from floweval.backends.batching import BatchPlan, plan_batches
from floweval.backends.cache import VerdictCache
from floweval.backends.config import (
    BackendPair,
    ConfigError,
    build_backend,
    load_backend_config,
    oracle_pair_config,
    parse_backend_config,
)
from floweval.backends.http import HttpVisionBackend
from floweval.backends.ocr import OcrResult, ocr_extract, split_ocr_response
from floweval.backends.oracle import OracleOcrBackend, OracleVeBackend, oracle_backends
from floweval.backends.prompts import ocr_prompt, ve_prompt
from floweval.backends.ve import VeStats, parse_ve_response, ve_verify

__all__ = [
    "BackendConfig",
    "BackendError",
    "BackendPair",
    "BatchPlan",
    "ConfigError",
    "EntailmentVerdict",
    "HttpVisionBackend",
    "ImageRef",
    "OcrResult",
    "OracleOcrBackend",
    "OracleVeBackend",
    "VeStats",
    "VerdictCache",
    "VisionBackend",
    "build_backend",
    "load_backend_config",
    "ocr_extract",
    "ocr_prompt",
    "oracle_backends",
    "oracle_pair_config",
    "parse_backend_config",
    "parse_ve_response",
    "plan_batches",
    "split_ocr_response",
    "ve_prompt",
    "ve_verify",
]
