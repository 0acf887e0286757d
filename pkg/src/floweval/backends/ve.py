"""Visual-entailment verification: prompt, batch, parse, default, cache."""

from __future__ import annotations

import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from floweval.backends.base import BackendConfig, EntailmentVerdict, ImageRef, VisionBackend
from floweval.backends.batching import plan_batches
from floweval.backends.cache import VerdictCache
from floweval.backends.prompts import ve_prompt
from floweval.backends.retry import call_with_retries
from floweval.mermaid import canonicalize_label

log = logging.getLogger(__name__)

# "1. yes" / "2) No"; a literal "yes/no" echo of the template is not an answer.
ANSWER_LINE = re.compile(r"^\s*(\d+)[.)]\s*(yes|no)\b(?!\s*/)", re.I)

DEFAULT_IN_FLIGHT = 4


@dataclass
class ParsedAnswers:
    answers: dict[int, tuple[bool, str]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def missing(self, n: int) -> list[int]:
        return [i for i in range(1, n + 1) if i not in self.answers]


def parse_ve_response(response: str, n: int) -> ParsedAnswers:
    """Extract 1-based answers for a batch of ``n`` elements.

    Out-of-range indices are ignored and repeated indices keep the first
    answer; both leave a warning.
    """
    parsed = ParsedAnswers()
    for line in response.splitlines():
        m = ANSWER_LINE.match(line)
        if not m:
            continue
        idx = int(m.group(1))
        if not 1 <= idx <= n:
            parsed.warnings.append(f"answer index {idx} outside batch of {n}")
            continue
        if idx in parsed.answers:
            parsed.warnings.append(f"duplicate answer for index {idx}")
            continue
        parsed.answers[idx] = (m.group(2).lower() == "yes", line.strip())
    return parsed


@dataclass
class VeStats:
    calls: int = 0
    cache_hits: int = 0
    warnings: list[str] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, warnings: list[str]) -> None:
        with self._lock:
            self.calls += 1
            self.warnings.extend(warnings)


def _verify_batch(
    image: ImageRef,
    elements: list[str],
    backend: VisionBackend,
    config: BackendConfig,
    stats: VeStats,
) -> dict[int, tuple[bool, str]]:
    """Query one batch, re-asking while answers are missing and retries remain."""
    prompt = ve_prompt(elements)
    merged: dict[int, tuple[bool, str]] = {}
    for attempt in range(config.max_retries + 1):
        response = call_with_retries(lambda: backend.infer(image, prompt), config.max_retries)
        parsed = parse_ve_response(response, len(elements))
        stats.record(parsed.warnings)
        for idx, ans in parsed.answers.items():
            merged.setdefault(idx, ans)
        if len(merged) == len(elements):
            break
        log.info("VE batch incomplete (%d/%d), attempt %d", len(merged), len(elements), attempt + 1)
    return merged


def ve_verify(
    image: ImageRef,
    elements: list[str],
    backend: VisionBackend,
    config: BackendConfig,
    *,
    cache: VerdictCache | None = None,
    in_flight: int = DEFAULT_IN_FLIGHT,
    stats: VeStats | None = None,
) -> list[EntailmentVerdict]:
    """One verdict per element, in element order.

    Elements sharing a canonical form are asked once. Unanswered elements
    come back as ``entailed=False, defaulted=True``.
    """
    stats = stats if stats is not None else VeStats()
    if not elements:
        return []
    keys = [canonicalize_label(e) for e in elements]
    resolved: dict[str, EntailmentVerdict] = {}
    pending: list[str] = []
    first_index: dict[str, int] = {}
    for i, key in enumerate(keys):
        if key in first_index:
            continue
        first_index[key] = i
        hit = cache.get(image.digest, key) if cache is not None else None
        if hit is not None:
            stats.cache_hits += 1
            resolved[key] = EntailmentVerdict(
                i, elements[i], bool(hit["entailed"]), "cache", None, bool(hit.get("defaulted", False))
            )
        else:
            pending.append(key)

    plan = plan_batches(len(pending), config.batch_size, complexity_hint=len(elements))
    jobs = [[elements[first_index[pending[i]]] for i in batch] for batch in plan.batches]

    def run(job: list[str]):
        return _verify_batch(image, job, backend, config, stats)

    if jobs:
        workers = max(1, min(in_flight, len(jobs)))
        if workers == 1:
            results = [run(j) for j in jobs]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run, jobs))
    else:
        results = []

    for b, (batch, answers) in enumerate(zip(plan.batches, results)):
        batch_id = f"{image.digest[:12]}:{b}"
        missing = 0
        for pos, pidx in enumerate(batch, 1):
            key = pending[pidx]
            i = first_index[key]
            if pos in answers:
                entailed, raw = answers[pos]
                verdict = EntailmentVerdict(i, elements[i], entailed, batch_id, raw, False)
            else:
                missing += 1
                verdict = EntailmentVerdict(i, elements[i], False, batch_id, None, True)
            resolved[key] = verdict
            if cache is not None:
                cache.put(image.digest, key, verdict.entailed, verdict.defaulted)
        if missing:
            stats.warnings.append(f"PartialResponse: batch {batch_id} defaulted {missing} element(s) to no")

    out = []
    for i, key in enumerate(keys):
        v = resolved[key]
        out.append(
            EntailmentVerdict(i, elements[i], v.entailed, v.batch_id, v.raw_line, v.defaulted)
        )
    return out
