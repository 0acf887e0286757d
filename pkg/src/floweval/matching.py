"""Fuzzy multiset intersection under normalised Levenshtein similarity."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from floweval import kernels

DEFAULT_THRESHOLD = 0.9


levenshtein = kernels.levenshtein


def similarity(a: str, b: str) -> float:
    """``1 - lev(a, b) / max(len(a), len(b))``; two empty strings score 1.0."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    if a == b:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...] = ()
    unmatched_left: tuple[int, ...] = ()
    unmatched_right: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def matched_left(self) -> frozenset[int]:
        return frozenset(i for i, _, _ in self.pairs)

    @property
    def matched_right(self) -> frozenset[int]:
        return frozenset(j for _, j, _ in self.pairs)


def candidate_pairs(
    left: Sequence[str], right: Sequence[str], threshold: float = DEFAULT_THRESHOLD
) -> list[tuple[int, int, float]]:
    """All cross pairs at or above ``threshold``, best first, ties by index."""
    if not left or not right:
        return []
    sim = kernels.similarity_matrix(left, right, threshold)
    ii, jj = np.nonzero(sim >= threshold)
    cand = [(int(i), int(j), float(sim[i, j])) for i, j in zip(ii, jj)]
    cand.sort(key=lambda p: (-p[2], p[0], p[1]))
    return cand


def _augment(match_l: dict[int, int], match_r: dict[int, int], adj: dict[int, list[int]], i: int, seen: set[int]) -> bool:
    for j in adj.get(i, ()):
        if j in seen:
            continue
        seen.add(j)
        if j not in match_r or _augment(match_l, match_r, adj, match_r[j], seen):
            match_l[i] = j
            match_r[j] = i
            return True
    return False


def intersect(
    left: Sequence[str], right: Sequence[str], threshold: float = DEFAULT_THRESHOLD
) -> MatchResult:
    """Injective matching of two multisets of canonical strings.

    ``len(result)`` is the fuzzy intersection cardinality. Pairs are first
    accepted greedily, in order of decreasing similarity while both endpoints
    are free. Left items left over are then offered augmenting paths (tried in
    the same best-first order), so the cardinality is always a maximum
    matching. On near-disjoint match graphs the repair step never fires and
    the result is the plain greedy one.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    cand = candidate_pairs(left, right, threshold)
    score = {(i, j): s for i, j, s in cand}
    adj: dict[int, list[int]] = {}
    match_l: dict[int, int] = {}
    match_r: dict[int, int] = {}
    for i, j, _ in cand:
        adj.setdefault(i, []).append(j)
        if i not in match_l and j not in match_r:
            match_l[i] = j
            match_r[j] = i
    for i in sorted(adj):
        if i not in match_l:
            _augment(match_l, match_r, adj, i, set())
    pairs = sorted((i, j, score[i, j]) for i, j in match_l.items())
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_left=tuple(i for i in range(len(left)) if i not in match_l),
        unmatched_right=tuple(j for j in range(len(right)) if j not in match_r),
    )


def members(
    queries: Sequence[str], pool: Sequence[str], threshold: float = DEFAULT_THRESHOLD
) -> list[bool]:
    """Per-query membership: does any pool item reach ``threshold``?"""
    if not queries:
        return []
    if not pool:
        return [False] * len(queries)
    sim = kernels.similarity_matrix(queries, pool, threshold)
    return [bool(x) for x in (sim.max(axis=1) >= threshold)]
