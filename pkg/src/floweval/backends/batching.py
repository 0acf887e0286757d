"""Splitting VE queries into API calls."""

from __future__ import annotations

import math
from dataclasses import dataclass

MIN_BATCH = 3
COMPLEX_IMAGE_ELEMENTS = 50


@dataclass(frozen=True)
class BatchPlan:
    batches: tuple[tuple[int, ...], ...]

    @property
    def sizes(self) -> list[int]:
        return [len(b) for b in self.batches]


def plan_batches(n_elements: int, batch_size: int = 10, complexity_hint: int | None = None) -> BatchPlan:
    """Balanced contiguous batches of element indices.

    Images with more than 50 elements get half the batch cap. No batch is
    smaller than three unless the whole image has fewer elements; that floor
    takes priority over the cap, so e.g. 4 elements at cap 3 form one batch.
    """
    if n_elements < 0:
        raise ValueError("n_elements must be non-negative")
    if batch_size < MIN_BATCH:
        raise ValueError(f"batch_size must be at least {MIN_BATCH}")
    if n_elements == 0:
        return BatchPlan(())
    hint = n_elements if complexity_hint is None else complexity_hint
    cap = batch_size if hint <= COMPLEX_IMAGE_ELEMENTS else max(MIN_BATCH, math.ceil(batch_size / 2))
    k = max(1, min(math.ceil(n_elements / cap), n_elements // MIN_BATCH))
    base, extra = divmod(n_elements, k)
    batches = []
    start = 0
    for b in range(k):
        size = base + (1 if b < extra else 0)
        batches.append(tuple(range(start, start + size)))
        start += size
    return BatchPlan(tuple(batches))
