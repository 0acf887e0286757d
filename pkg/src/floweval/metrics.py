"""Ground-truth and reference-free scores for one generated chart."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

from floweval.backends.base import BackendConfig, EntailmentVerdict, ImageRef, VisionBackend
from floweval.backends.cache import VerdictCache
from floweval.backends.ocr import ocr_extract
from floweval.backends.ve import DEFAULT_IN_FLIGHT, VeStats, ve_verify
from floweval.matching import DEFAULT_THRESHOLD, intersect
from floweval.mermaid import ElementSet, decompose, parse_mermaid

# Degenerate-input flags.
OCR_EMPTY = "DegenerateInput:ocr_empty"
GENERATED_EMPTY = "DegenerateInput:generated_empty"
ACTUAL_EMPTY = "DegenerateInput:actual_empty"
PARSE_PRODUCED_NOTHING = "ParseProducedNothing"

# Recorded in every report so corpus consumers know how elements were counted.
CHOICES = {
    "implicit_nodes_counted": True,
    "ocr_match_pool": "node_labels+edge_labels",
    "edge_hypothesis_format": "src -->|label| dst",
}


class MissingVerdict(ValueError):
    pass


@dataclass(frozen=True)
class MetricReport:
    image_id: str | None = None
    recall_ocr: float | None = None
    precision_ve: float | None = None
    f1_ocr_ve: float | None = None
    recall_actual: float | None = None
    precision_actual: float | None = None
    f1_actual: float | None = None
    recall_actual_text: float | None = None
    f1_actual_text: float | None = None
    missed_elements: tuple[str, ...] = ()
    hallucinated_elements: tuple[str, ...] = ()
    counts: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()
    backends: dict = field(default_factory=dict)
    threshold: float = DEFAULT_THRESHOLD
    # Runtime bookkeeping; excluded from the default JSON so warm and cold runs diff clean.
    cache_hits: int = field(default=0, compare=False)
    backend_calls: int = field(default=0, compare=False)
    runtime_warnings: tuple[str, ...] = field(default=(), compare=False)

    def to_dict(self, include_runtime: bool = False) -> dict:
        d = asdict(self)
        d["missed_elements"] = list(self.missed_elements)
        d["hallucinated_elements"] = list(self.hallucinated_elements)
        d["flags"] = list(self.flags)
        d["warnings"] = list(self.warnings)
        d["choices"] = dict(CHOICES)
        if not include_runtime:
            del d["cache_hits"], d["backend_calls"], d["runtime_warnings"]
        else:
            d["runtime_warnings"] = sorted(self.runtime_warnings)
        return d

    def to_json(self, include_runtime: bool = False, indent: int | None = 2) -> str:
        return json.dumps(
            self.to_dict(include_runtime), indent=indent, sort_keys=True, ensure_ascii=False
        )

    def scores(self) -> dict[str, float | None]:
        keys = ("recall_ocr", "precision_ve", "f1_ocr_ve", "recall_actual", "precision_actual", "f1_actual")
        return {k: getattr(self, k) for k in keys}


def f1_composite(recall: float, precision: float) -> float:
    """Harmonic mean; 0 when both components are 0."""
    total = recall + precision
    if total == 0:
        return 0.0
    return 2.0 * recall * precision / total


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def recall_ocr(
    ocr_texts: Sequence[str], generated: ElementSet, threshold: float = DEFAULT_THRESHOLD
) -> tuple[float | None, list[str]]:
    """Share of OCR texts found among the generated labels (node and edge).

    Returns ``(score, missed)``; score is None when OCR found nothing.
    """
    pool = generated.text_elements
    match = intersect(list(ocr_texts), list(pool), threshold)
    missed = [ocr_texts[i] for i in match.unmatched_left]
    return _ratio(len(match), len(ocr_texts)), missed


def precision_ve(
    generated: ElementSet, verdicts: Sequence[EntailmentVerdict]
) -> tuple[float | None, list[str]]:
    """Entailed share of generated elements, plus the non-entailed ones."""
    n = len(generated.rendered)
    seen = sorted(v.element_index for v in verdicts)
    if seen != list(range(n)):
        raise MissingVerdict(f"verdicts cover {len(set(seen))} of {n} elements")
    by_index = {v.element_index: v for v in verdicts}
    hallucinated = [generated.rendered[i] for i in range(n) if not by_index[i].entailed]
    return _ratio(n - len(hallucinated), n), hallucinated


def _f1_or_absent(recall: float | None, precision: float | None, generated_empty: bool) -> float | None:
    if recall is not None and precision is not None:
        return f1_composite(recall, precision)
    if generated_empty and recall is not None:
        return 0.0
    return None


def traditional_metrics(
    actual: ElementSet, generated: ElementSet, threshold: float = DEFAULT_THRESHOLD
) -> tuple[float | None, float | None, float | None]:
    """(recall, precision, f1) of generated against ground truth; absent entries are None."""
    n = len(intersect(list(actual.keys), list(generated.keys), threshold))
    recall = _ratio(n, len(actual.keys))
    precision = _ratio(n, len(generated.keys))
    return recall, precision, _f1_or_absent(recall, precision, len(generated.keys) == 0)


def text_recall(actual: ElementSet, generated: ElementSet, threshold: float = DEFAULT_THRESHOLD) -> float | None:
    """Recall restricted to visible text (node labels and edge labels)."""
    n = len(intersect(list(actual.text_elements), list(generated.text_elements), threshold))
    return _ratio(n, len(actual.text_elements))


def with_ground_truth(
    report: MetricReport, actual: ElementSet, generated: ElementSet
) -> MetricReport:
    """Fill the ground-truth fields of ``report``."""
    t = report.threshold
    recall, precision, f1 = traditional_metrics(actual, generated, t)
    r_text = text_recall(actual, generated, t)
    flags = list(report.flags)
    if not actual.keys and ACTUAL_EMPTY not in flags:
        flags.append(ACTUAL_EMPTY)
    if not generated.keys and GENERATED_EMPTY not in flags:
        flags.append(GENERATED_EMPTY)
    counts = dict(report.counts)
    counts["actual"] = len(actual.keys)
    counts["actual_and_generated"] = len(intersect(list(actual.keys), list(generated.keys), t))
    return replace(
        report,
        recall_actual=recall,
        precision_actual=precision,
        f1_actual=f1,
        recall_actual_text=r_text,
        f1_actual_text=_f1_or_absent(r_text, precision, not generated.keys),
        counts=counts,
        flags=tuple(flags),
    )


def ground_truth_report(
    actual_source: str, generated_source: str, threshold: float = DEFAULT_THRESHOLD, image_id: str | None = None
) -> MetricReport:
    actual = decompose(parse_mermaid(actual_source, "lenient"))
    graph = parse_mermaid(generated_source, "lenient")
    generated = decompose(graph)
    flags = (PARSE_PRODUCED_NOTHING,) if not generated.keys else ()
    base = MetricReport(
        image_id=image_id,
        counts={"generated": len(generated.keys)},
        flags=flags,
        warnings=tuple(f"line {w.line}: {w.message}" for w in graph.warnings),
        threshold=threshold,
    )
    return with_ground_truth(base, actual, generated)


@dataclass(frozen=True)
class Evaluation:
    """A report together with the intermediate data it was computed from."""

    report: MetricReport
    generated: ElementSet
    ocr_texts: tuple[str, ...]
    verdicts: tuple[EntailmentVerdict, ...]


def evaluate_detailed(
    image: ImageRef,
    mermaid_source: str,
    ocr_backend: VisionBackend,
    ve_backend: VisionBackend,
    *,
    ve_config: BackendConfig | None = None,
    ocr_retries: int = 2,
    cache_dir=None,
    threshold: float = DEFAULT_THRESHOLD,
    in_flight: int = DEFAULT_IN_FLIGHT,
    image_id: str | None = None,
) -> Evaluation:
    if ve_config is None:
        ve_config = BackendConfig(getattr(ve_backend, "backend_id", "ve"), kind="custom")
    graph = parse_mermaid(mermaid_source, "lenient")
    generated = decompose(graph)
    flags: list[str] = []
    if not generated.keys:
        flags.append(PARSE_PRODUCED_NOTHING)

    ocr_cache = ve_cache = None
    if cache_dir is not None:
        ocr_cache = VerdictCache(cache_dir, ocr_backend.backend_id)
        ve_cache = VerdictCache(cache_dir, ve_backend.backend_id)
    backends = [ocr_backend] if ocr_backend is ve_backend else [ocr_backend, ve_backend]
    calls_before = sum(b.calls for b in backends)

    ocr = ocr_extract(image, ocr_backend, max_retries=ocr_retries, cache=ocr_cache)
    ocr_texts = list(ocr.texts)
    r_ocr, missed = recall_ocr(ocr_texts, generated, threshold)
    if r_ocr is None:
        flags.append(OCR_EMPTY)

    stats = VeStats()
    verdicts = ve_verify(
        image, list(generated.rendered), ve_backend, ve_config, cache=ve_cache, in_flight=in_flight, stats=stats
    )
    p_ve, hallucinated = precision_ve(generated, verdicts)
    if p_ve is None:
        flags.append(GENERATED_EMPTY)

    report = MetricReport(
        image_id=image_id,
        recall_ocr=r_ocr,
        precision_ve=p_ve,
        f1_ocr_ve=_f1_or_absent(r_ocr, p_ve, not generated.keys),
        missed_elements=tuple(missed),
        hallucinated_elements=tuple(hallucinated),
        counts={
            "ocr": len(ocr_texts),
            "generated": len(generated.rendered),
            "entailed": len(generated.rendered) - len(hallucinated),
            "ocr_and_generated": len(ocr_texts) - len(missed),
            "defaulted": sum(v.defaulted for v in verdicts),
        },
        flags=tuple(flags),
        warnings=tuple(f"line {w.line}: {w.message}" for w in graph.warnings),
        backends={"ocr": ocr_backend.backend_id, "ve": ve_backend.backend_id},
        threshold=threshold,
        cache_hits=stats.cache_hits + int(ocr.from_cache),
        backend_calls=sum(b.calls for b in backends) - calls_before,
        runtime_warnings=tuple(ocr.flags) + tuple(stats.warnings),
    )
    return Evaluation(report, generated, tuple(ocr_texts), tuple(verdicts))


def evaluate_reference_free(
    image: ImageRef,
    mermaid_source: str,
    ocr_backend: VisionBackend,
    ve_backend: VisionBackend,
    **kwargs,
) -> MetricReport:
    """Score generated Mermaid against its source image alone.

    parse -> decompose -> OCR -> fuzzy match -> batched VE -> report. Keyword
    arguments are those of :func:`evaluate_detailed`. Raises
    :class:`~floweval.backends.BackendError` when a backend stays down.
    """
    return evaluate_detailed(image, mermaid_source, ocr_backend, ve_backend, **kwargs).report
