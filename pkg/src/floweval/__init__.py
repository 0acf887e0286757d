"""Reference-free evaluation of flowchart image-to-code generation."""

__version__ = "0.1.0"

from floweval.matching import intersect, similarity
from floweval.mermaid import ElementSet, FlowchartGraph, canonicalize_label, decompose, parse_mermaid
from floweval.metrics import (
    MetricReport,
    evaluate_reference_free,
    f1_composite,
    precision_ve,
    recall_ocr,
    traditional_metrics,
)

__all__ = [
    "ElementSet",
    "FlowchartGraph",
    "MetricReport",
    "canonicalize_label",
    "decompose",
    "evaluate_reference_free",
    "f1_composite",
    "intersect",
    "parse_mermaid",
    "precision_ve",
    "recall_ocr",
    "similarity",
    "traditional_metrics",
]
