"""Deterministic test doubles that answer from ground truth.

When no ground truth is given, the image bytes themselves are read as the
chart's Mermaid source, so a synthetic corpus can use ``.mmd`` files as its
"images".
"""

from __future__ import annotations

import random
import re

from floweval.backends.base import ImageRef, VisionBackend
from floweval.matching import DEFAULT_THRESHOLD, members
from floweval.mermaid import ElementSet, canonicalize_label, decompose, parse_mermaid

_ELEMENT_LINE = re.compile(r"^(\d+)\. (?:node|edge): (.*)$")


def _unit(*parts) -> float:
    return random.Random("|".join(str(p) for p in parts)).random()


class _OracleBase(VisionBackend):
    def __init__(self, ground_truth: ElementSet | None, seed: int):
        super().__init__()
        self.ground_truth = ground_truth
        self.seed = seed
        self._decoded: dict[str, ElementSet] = {}

    def truth_for(self, image: ImageRef) -> ElementSet:
        if self.ground_truth is not None:
            return self.ground_truth
        digest = image.digest
        if digest not in self._decoded:
            text = image.data.decode("utf-8", errors="replace")
            self._decoded[digest] = decompose(parse_mermaid(text, "lenient"))
        return self._decoded[digest]


class OracleOcrBackend(_OracleBase):
    """Emits every visible text of the chart, each dropped with ``miss_rate``."""

    def __init__(self, ground_truth: ElementSet | None = None, miss_rate: float = 0.0, seed: int = 0):
        super().__init__(ground_truth, seed)
        if not 0.0 <= miss_rate < 1.0:
            raise ValueError("miss_rate must lie in [0, 1)")
        self.miss_rate = miss_rate
        self.backend_id = f"oracle-ocr(miss={miss_rate},seed={seed})"

    def _infer(self, image: ImageRef, prompt: str) -> str:
        texts = self.truth_for(image).text_elements
        kept = [
            t
            for i, t in enumerate(texts)
            if self.miss_rate == 0.0 or _unit(self.seed, image.digest, "ocr", i) >= self.miss_rate
        ]
        return "\n".join(kept) if kept else "No text found"


class OracleVeBackend(_OracleBase):
    """Says yes iff an element fuzzy-matches ground truth, then flips with fpr/fnr.

    The flip draw depends only on (seed, image, element), so verdicts do not
    depend on batching or thread scheduling.
    """

    def __init__(
        self,
        ground_truth: ElementSet | None = None,
        fpr: float = 0.0,
        fnr: float = 0.0,
        seed: int = 0,
        threshold: float = DEFAULT_THRESHOLD,
    ):
        super().__init__(ground_truth, seed)
        if not (0.0 <= fpr < 1.0 and 0.0 <= fnr < 1.0):
            raise ValueError("fpr and fnr must lie in [0, 1)")
        self.fpr = fpr
        self.fnr = fnr
        self.threshold = threshold
        self.backend_id = f"oracle-ve(fpr={fpr},fnr={fnr},seed={seed})"

    def judge(self, image: ImageRef, elements: list[str]) -> list[bool]:
        keys = [canonicalize_label(e) for e in elements]
        truth = members(keys, self.truth_for(image).keys, self.threshold)
        out = []
        for key, present in zip(keys, truth):
            u = _unit(self.seed, image.digest, "ve", key)
            if present:
                out.append(u >= self.fnr)
            else:
                out.append(u < self.fpr)
        return out

    def _infer(self, image: ImageRef, prompt: str) -> str:
        _, _, tail = prompt.partition("Elements to check:\n")
        listed = []
        for line in tail.splitlines():
            m = _ELEMENT_LINE.match(line)
            if not m:
                break
            listed.append((int(m.group(1)), m.group(2)))
        verdicts = self.judge(image, [text for _, text in listed])
        return "\n".join(f"{n}. {'yes' if v else 'no'}" for (n, _), v in zip(listed, verdicts))


def oracle_backends(
    ground_truth: ElementSet | None = None,
    fpr: float = 0.0,
    fnr: float = 0.0,
    seed: int = 0,
    miss_rate: float = 0.0,
) -> tuple[OracleOcrBackend, OracleVeBackend]:
    return (
        OracleOcrBackend(ground_truth, miss_rate=miss_rate, seed=seed),
        OracleVeBackend(ground_truth, fpr=fpr, fnr=fnr, seed=seed),
    )
