from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def appendix_source() -> str:
    return (DATA / "appendix_listing.mmd").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def corpus():
    from floweval.synth import synthetic_corpus

    return synthetic_corpus(20, seed=0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
