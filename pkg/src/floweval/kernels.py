"""Numeric inner loops: edit distance, similarity matrices, Kendall pair counts.

Every kernel exists twice: a loop version compiled with numba and a
vectorised numpy version. ``similarity_matrix`` and ``kendall_counts`` pick
one according to :data:`floweval._accel.USE_NUMBA`; both variants are public
so tests and the benchmark can compare them directly.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from floweval._accel import USE_NUMBA, maybe_njit

BACKEND = "numba" if USE_NUMBA else "numpy"


def encode(s: str) -> np.ndarray:
    """Code points of ``s`` as a uint32 array."""
    return np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32)


def pack(strings: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate code points of ``strings``; return ``(buffer, offsets)``.

    String ``i`` lives in ``buffer[offsets[i]:offsets[i + 1]]``.
    """
    parts = [encode(s) for s in strings]
    offsets = np.zeros(len(parts) + 1, dtype=np.int64)
    if parts:
        offsets[1:] = np.cumsum([len(p) for p in parts])
        buf = np.concatenate(parts) if offsets[-1] else np.zeros(0, dtype=np.uint32)
    else:
        buf = np.zeros(0, dtype=np.uint32)
    return buf, offsets


# ---------------------------------------------------------------------------
# Levenshtein
# ---------------------------------------------------------------------------


def _levenshtein_loops(a, b):
    n = a.shape[0]
    m = b.shape[0]
    if n == 0:
        return m
    if m == 0:
        return n
    prev = np.empty(m + 1, dtype=np.int64)
    cur = np.empty(m + 1, dtype=np.int64)
    for j in range(m + 1):
        prev[j] = j
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            best = prev[j - 1] + cost
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


levenshtein_jit = maybe_njit(_levenshtein_loops)


def levenshtein_np(a: np.ndarray, b: np.ndarray) -> int:
    """Row-vectorised Wagner-Fischer.

    Insertions within a row are resolved with a running minimum:
    ``cur[j] = min_k (c[k] + j - k)``.
    """
    n, m = a.shape[0], b.shape[0]
    if n == 0:
        return m
    if m == 0:
        return n
    ramp = np.arange(m + 1, dtype=np.int64)
    prev = ramp.copy()
    c = np.empty(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        c[0] = i
        np.minimum(prev[:-1] + (b != a[i - 1]), prev[1:] + 1, out=c[1:])
        prev = np.minimum.accumulate(c - ramp) + ramp
    return int(prev[m])


def levenshtein(a: str, b: str) -> int:
    ea, eb = encode(a), encode(b)
    if USE_NUMBA:
        return int(levenshtein_jit(ea, eb))
    return levenshtein_np(ea, eb)


# ---------------------------------------------------------------------------
# Pairwise similarity
# ---------------------------------------------------------------------------


def _similarity_matrix_loops(lbuf, loff, rbuf, roff):
    nl = loff.shape[0] - 1
    nr = roff.shape[0] - 1
    out = np.empty((nl, nr), dtype=np.float64)
    for i in range(nl):
        a = lbuf[loff[i] : loff[i + 1]]
        for j in range(nr):
            b = rbuf[roff[j] : roff[j + 1]]
            longest = max(a.shape[0], b.shape[0])
            if longest == 0:
                out[i, j] = 1.0
            else:
                out[i, j] = 1.0 - levenshtein_jit(a, b) / longest
    return out


similarity_matrix_jit = maybe_njit(_similarity_matrix_loops)


_CHUNK_CELLS = 1 << 21


def _padded(buf: np.ndarray, off: np.ndarray, fill: int) -> tuple[np.ndarray, np.ndarray]:
    lens = np.diff(off)
    width = int(lens.max()) if lens.size else 0
    out = np.full((lens.size, width), fill, dtype=np.int64)
    out[np.arange(width) < lens[:, None]] = buf
    return out, lens


def levenshtein_rows_np(
    a: np.ndarray, la: np.ndarray, b: np.ndarray, lb: np.ndarray, cutoff: np.ndarray | None = None
) -> np.ndarray:
    """Edit distances of row-aligned pairs ``(a[p, :la[p]], b[p, :lb[p]])``.

    The same running-minimum recurrence as :func:`levenshtein_np`, applied to
    all pairs at once. Padding never influences a prefix cell, so each
    distance is read off at row ``la[p]``, column ``lb[p]``.

    With ``cutoff``, a pair is abandoned as soon as its row minimum exceeds
    ``cutoff[p]`` (row minima never decrease) and reported as ``cutoff[p] + 1``.
    """
    n_pairs, width_a = a.shape
    ramp = np.arange(b.shape[1] + 1, dtype=np.int64)
    result = lb.astype(np.int64).copy()
    if cutoff is not None:
        result = np.where(la == 0, result, cutoff + 1)
    idx = np.flatnonzero(la > 0)
    if idx.size == 0:
        return result
    a, la, b, lb = a[idx], la[idx], b[idx], lb[idx]
    cut = None if cutoff is None else cutoff[idx]
    prev = np.broadcast_to(ramp, (idx.size, ramp.size)).copy()
    for i in range(1, width_a + 1):
        c = np.empty_like(prev)
        c[:, 0] = i
        np.minimum(prev[:, :-1] + (b != a[:, i - 1 : i]), prev[:, 1:] + 1, out=c[:, 1:])
        prev = np.minimum.accumulate(c - ramp, axis=1) + ramp
        done = la == i
        if done.any():
            result[idx[done]] = prev[np.flatnonzero(done), lb[done]]
        keep = ~done
        if cut is not None:
            keep &= prev.min(axis=1) <= cut
        if not keep.all():
            idx, a, la, b, lb, prev = idx[keep], a[keep], la[keep], b[keep], lb[keep], prev[keep]
            if cut is not None:
                cut = cut[keep]
            if idx.size == 0:
                break
    return result


def similarity_matrix_np(lbuf, loff, rbuf, roff, floor: float = 0.0) -> np.ndarray:
    nl, nr = loff.shape[0] - 1, roff.shape[0] - 1
    if nl == 0 or nr == 0:
        return np.empty((nl, nr), dtype=np.float64)
    left, llen = _padded(lbuf, loff, -1)
    right, rlen = _padded(rbuf, roff, -2)
    ii = np.repeat(np.arange(nl), nr)
    jj = np.tile(np.arange(nr), nl)
    longest = np.maximum(llen[ii], rlen[jj])
    sim = np.zeros(ii.size, dtype=np.float64)
    sim[longest == 0] = 1.0
    todo = np.flatnonzero(longest > 0)
    cutoff = None
    if floor > 0.0:
        # one extra unit of slack keeps rounding at the boundary on the safe side
        cutoff_all = np.floor((1.0 - floor) * longest).astype(np.int64) + 1
        todo = todo[np.abs(llen[ii[todo]] - rlen[jj[todo]]) <= cutoff_all[todo]]
        cutoff = cutoff_all
    step = max(1, _CHUNK_CELLS // (right.shape[1] + 1))
    for start in range(0, todo.size, step):
        sel = todo[start : start + step]
        li, rj = ii[sel], jj[sel]
        dist = levenshtein_rows_np(
            left[li], llen[li], right[rj], rlen[rj], None if cutoff is None else cutoff[sel]
        )
        sim[sel] = 1.0 - dist / longest[sel]
    if floor > 0.0:
        sim[sim < floor] = 0.0
    return sim.reshape(nl, nr)


def similarity_matrix(left: Sequence[str], right: Sequence[str], floor: float = 0.0) -> np.ndarray:
    """Normalised Levenshtein similarity for every (left, right) pair.

    Entries below ``floor`` are reported as 0.0, which lets the numpy kernel
    skip pairs that cannot reach it.
    """
    lbuf, loff = pack(left)
    rbuf, roff = pack(right)
    if USE_NUMBA:
        sim = similarity_matrix_jit(lbuf, loff, rbuf, roff)
        if floor > 0.0:
            sim[sim < floor] = 0.0
        return sim
    return similarity_matrix_np(lbuf, loff, rbuf, roff, floor)


# ---------------------------------------------------------------------------
# Kendall pair counting
# ---------------------------------------------------------------------------


def _kendall_counts_loops(x, y):
    n = x.shape[0]
    s = 0
    tied_x = 0
    tied_y = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0:
                tied_x += 1
            if dy == 0:
                tied_y += 1
            if dx != 0 and dy != 0:
                if (dx > 0) == (dy > 0):
                    s += 1
                else:
                    s -= 1
    return s, tied_x, tied_y


kendall_counts_jit = maybe_njit(_kendall_counts_loops)


def kendall_counts_np(x: np.ndarray, y: np.ndarray) -> tuple[int, int, int]:
    iu = np.triu_indices(x.shape[0], k=1)
    sx = np.sign(np.subtract.outer(x, x)[iu])
    sy = np.sign(np.subtract.outer(y, y)[iu])
    return int(np.sum(sx * sy)), int(np.sum(sx == 0)), int(np.sum(sy == 0))


def kendall_counts(x, y) -> tuple[int, int, int]:
    """Return ``(concordant - discordant, pairs tied in x, pairs tied in y)``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if USE_NUMBA:
        s, tx, ty = kendall_counts_jit(x, y)
        return int(s), int(tx), int(ty)
    return kendall_counts_np(x, y)
