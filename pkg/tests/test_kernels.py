import os
import random
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floweval import kernels
from oracles import edit_distance, kendall_tau_b_pairs, similarity

short_text = st.text(alphabet="ab c'~é", max_size=12)

LEV_IMPLS = {
    "jit": lambda a, b: int(kernels.levenshtein_jit(kernels.encode(a), kernels.encode(b))),
    "numpy": lambda a, b: kernels.levenshtein_np(kernels.encode(a), kernels.encode(b)),
}
SIM_IMPLS = {"jit": kernels.similarity_matrix_jit, "numpy": kernels.similarity_matrix_np}
KENDALL_IMPLS = {"jit": kernels.kendall_counts_jit, "numpy": kernels.kendall_counts_np}


@pytest.mark.parametrize("impl", sorted(LEV_IMPLS))
@pytest.mark.parametrize(
    "a,b,d",
    [("", "", 0), ("", "abc", 3), ("kitten", "sitting", 3), ("color", "colour", 1), ("flaw", "lawn", 2)],
)
def test_levenshtein_known(impl, a, b, d):
    assert LEV_IMPLS[impl](a, b) == d


@pytest.mark.parametrize("impl", sorted(LEV_IMPLS))
@given(a=short_text, b=short_text)
@settings(max_examples=150, deadline=None)
def test_levenshtein_matches_oracle(impl, a, b):
    assert LEV_IMPLS[impl](a, b) == edit_distance(a, b)


@pytest.mark.parametrize("impl", sorted(SIM_IMPLS))
def test_similarity_matrix_matches_oracle(impl):
    rng = random.Random(3)
    words = ["".join(rng.choice("abcd ") for _ in range(rng.randint(0, 9))) for _ in range(14)]
    left, right = words[:8], words[8:]
    lbuf, loff = kernels.pack(left)
    rbuf, roff = kernels.pack(right)
    got = SIM_IMPLS[impl](lbuf, loff, rbuf, roff)
    want = np.array([[similarity(a, b) for b in right] for a in left])
    np.testing.assert_allclose(got, want, atol=1e-12)


@given(
    left=st.lists(st.text(alphabet="ab\u00e9\u4e2d ", max_size=7), max_size=5),
    right=st.lists(st.text(alphabet="ab\u00e9\u4e2d ", max_size=7), max_size=5),
)
@settings(max_examples=150, deadline=None)
def test_batched_numpy_similarity_equals_jit(left, right):
    lbuf, loff = kernels.pack(left)
    rbuf, roff = kernels.pack(right)
    exact = kernels.similarity_matrix_jit(lbuf, loff, rbuf, roff)
    np.testing.assert_array_equal(kernels.similarity_matrix_np(lbuf, loff, rbuf, roff), exact)
    for floor in (0.5, 0.75, 0.8, 0.9, 1.0):
        want = np.where(exact >= floor, exact, 0.0)
        np.testing.assert_array_equal(kernels.similarity_matrix_np(lbuf, loff, rbuf, roff, floor), want)


def test_floor_keeps_boundary_pairs():
    # 1 - 1/10 sits exactly on the 0.9 floor and must survive the pruning
    for floor in (0.9, 0.8999999999999999):
        sim = kernels.similarity_matrix(["abcdefghij"], ["abcdefghiX", "abcdefghXY"], floor)
        assert sim[0, 0] == pytest.approx(0.9) and sim[0, 1] == 0.0


def test_batched_numpy_similarity_chunks(monkeypatch):
    monkeypatch.setattr(kernels, "_CHUNK_CELLS", 7)
    words = ["start", "", "end of loop", "stat", "x"]
    lbuf, loff = kernels.pack(words)
    got = kernels.similarity_matrix_np(lbuf, loff, lbuf, loff)
    want = np.array([[similarity(a, b) for b in words] for a in words])
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_pack_handles_empty_inputs():
    buf, off = kernels.pack([])
    assert buf.size == 0 and list(off) == [0]
    buf, off = kernels.pack(["", ""])
    assert buf.size == 0 and list(off) == [0, 0, 0]
    assert kernels.similarity_matrix(["", ""], [""]).tolist() == [[1.0], [1.0]]


@pytest.mark.parametrize("impl", sorted(KENDALL_IMPLS))
def test_kendall_counts_agree(impl):
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(2, 40))
        x = rng.integers(0, 5, n).astype(float)
        y = rng.integers(0, 5, n).astype(float)
        s, tx, ty = KENDALL_IMPLS[impl](x, y)
        n0 = n * (n - 1) // 2
        if (n0 - tx) * (n0 - ty) == 0:
            continue
        tau = s / np.sqrt((n0 - tx) * (n0 - ty))
        assert tau == pytest.approx(kendall_tau_b_pairs(x.tolist(), y.tolist()), abs=1e-12)


def test_disable_flag_selects_numpy():
    code = "from floweval import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, FLOWEVAL_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["FLOWEVAL_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"
