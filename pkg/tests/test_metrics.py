import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floweval.backends import BackendConfig, EntailmentVerdict, ImageRef, oracle_backends
from floweval.metrics import (
    GENERATED_EMPTY,
    OCR_EMPTY,
    PARSE_PRODUCED_NOTHING,
    MissingVerdict,
    evaluate_reference_free,
    f1_composite,
    ground_truth_report,
    precision_ve,
    recall_ocr,
    text_recall,
    traditional_metrics,
    with_ground_truth,
)
from floweval.mermaid import ElementSet, decompose, parse_mermaid
from floweval.synth import delete_nodes


def nodes_only(*labels) -> ElementSet:
    return decompose(parse_mermaid("flowchart TD\n" + "\n".join(f'n{i}["{l}"]' for i, l in enumerate(labels))))


def verdicts(flags):
    return [EntailmentVerdict(i, f"e{i}", bool(v), "b0") for i, v in enumerate(flags)]


def test_recall_ocr_partial():
    score, missed = recall_ocr(["start", "end", "check"], nodes_only("Start", "End"))
    assert score == pytest.approx(2 / 3)
    assert missed == ["check"]


def test_recall_ocr_identity():
    gen = nodes_only("A one", "B two")
    assert recall_ocr(list(gen.node_labels), gen) == (1.0, [])


def test_recall_ocr_seventeen_of_twenty():
    labels = [f"step number {i:02d} ok" for i in range(20)]
    gen = nodes_only(*labels[:17])
    score, missed = recall_ocr([l for l in labels], gen)
    assert score == pytest.approx(0.85)
    assert len(missed) == 3


def test_recall_ocr_counts_edge_labels(appendix_source):
    gen = decompose(parse_mermaid(appendix_source))
    score, missed = recall_ocr(["yes", "no", "yes", "no", "start"], gen)
    assert score == 1.0 and missed == []


def test_recall_ocr_absent_when_no_ocr_text():
    assert recall_ocr([], nodes_only("x")) == (None, [])


def test_precision_ve_nine_of_ten():
    gen = nodes_only(*[f"label {c}" for c in "abcdefghij"])
    score, halluc = precision_ve(gen, verdicts([1] * 9 + [0]))
    assert score == pytest.approx(0.9)
    assert halluc == ["label j"]


def test_precision_ve_all_yes_and_missing_coverage():
    gen = nodes_only("a", "b")
    assert precision_ve(gen, verdicts([1, 1])) == (1.0, [])
    with pytest.raises(MissingVerdict):
        precision_ve(gen, verdicts([1]))


def test_precision_ve_absent_on_empty_generation():
    assert precision_ve(ElementSet(), []) == (None, [])


def test_traditional_metrics_examples():
    r, p, f = traditional_metrics(nodes_only("a", "b", "c"), nodes_only("a", "b", "d"))
    assert (r, p, f) == pytest.approx((2 / 3, 2 / 3, 2 / 3))
    assert traditional_metrics(nodes_only("a", "b"), nodes_only("a", "b")) == (1.0, 1.0, 1.0)
    assert traditional_metrics(nodes_only("a"), ElementSet()) == (0.0, None, 0.0)
    assert traditional_metrics(ElementSet(), nodes_only("a")) == (None, 0.0, None)


def test_f1_composite_examples():
    assert f1_composite(0.85, 0.9) == pytest.approx(0.8743, abs=5e-5)
    assert f1_composite(0.85, 0.9) == pytest.approx(2 * 0.765 / 1.75, abs=1e-15)
    assert f1_composite(0.0, 1.0) == 0.0
    assert f1_composite(0.0, 0.0) == 0.0


@given(st.floats(0, 1), st.floats(0, 1))
def test_f1_identity(r, p):
    f = f1_composite(r, p)
    assert f * (r + p) == pytest.approx(2 * r * p, abs=1e-12)
    assert min(r, p) - 1e-12 <= f <= max(r, p) + 1e-12


@given(st.floats(0, 1))
def test_f1_of_equal_components(x):
    assert f1_composite(x, x) == pytest.approx(x, abs=1e-15)


def _evaluate(gt_source, gen_source, **kw):
    image = ImageRef.from_bytes(gt_source.encode())
    ocr, ve = oracle_backends(**kw)
    return evaluate_reference_free(image, gen_source, ocr, ve, ve_config=BackendConfig("oracle-ve"))


def test_self_consistency(appendix_source):
    r = _evaluate(appendix_source, appendix_source)
    assert (r.recall_ocr, r.precision_ve, r.f1_ocr_ve) == (1.0, 1.0, 1.0)
    assert r.counts["generated"] == 19 and r.counts["ocr"] == 13


def test_deleted_nodes_match_fixture_expectation(appendix_source):
    import random

    g = parse_mermaid(appendix_source)
    gen, lost = delete_nodes(g, 2, random.Random(5))
    from floweval.mermaid import render_mermaid

    r = _evaluate(appendix_source, render_mermaid(gen))
    assert r.recall_ocr == pytest.approx((13 - lost) / 13, abs=1e-12)
    assert len(r.missed_elements) == lost
    assert r.precision_ve == 1.0


def test_fabricated_node_and_edge(appendix_source):
    gen = appendix_source.replace("```\n", "", 1).rstrip("`\n") + '\n    Z["Send confirmation email"]\n    F --> Z\n'
    r = _evaluate(appendix_source, gen)
    assert r.precision_ve == pytest.approx(19 / 21, abs=1e-12)
    assert r.recall_ocr == 1.0
    assert r.hallucinated_elements == ("Send confirmation email", "End --> Send confirmation email")


def test_report_invariants(appendix_source):
    r = _evaluate(appendix_source, 'flowchart TD\nA(["Start"]) --> Q["Bogus"]', fpr=0.0)
    assert len(r.missed_elements) == r.counts["ocr"] - r.counts["ocr_and_generated"]
    assert len(r.hallucinated_elements) == r.counts["generated"] - r.counts["entailed"]
    assert r.f1_ocr_ve * (r.recall_ocr + r.precision_ve) == pytest.approx(2 * r.recall_ocr * r.precision_ve)


def test_empty_generation_is_total_failure(appendix_source):
    r = _evaluate(appendix_source, "I could not read the image.")
    assert r.recall_ocr == 0.0
    assert r.precision_ve is None
    assert r.f1_ocr_ve == 0.0
    assert PARSE_PRODUCED_NOTHING in r.flags and GENERATED_EMPTY in r.flags


def test_blank_image_flags_ocr_empty():
    r = _evaluate("flowchart TD", 'flowchart TD\nA["x"]')
    assert r.recall_ocr is None and OCR_EMPTY in r.flags
    assert r.f1_ocr_ve is None
    assert r.precision_ve == 0.0


def test_adding_hallucination_lowers_precision_only(appendix_source):
    base = _evaluate(appendix_source, appendix_source)
    more = _evaluate(appendix_source, appendix_source.rstrip("`\n") + '\n    Q["Totally invented"]\n')
    assert more.precision_ve < base.precision_ve
    assert more.recall_ocr == base.recall_ocr


def test_removing_labelled_node_never_raises_recall(appendix_source):
    import random

    from floweval.mermaid import render_mermaid

    g = parse_mermaid(appendix_source)
    prev = _evaluate(appendix_source, appendix_source).recall_ocr
    rng = random.Random(1)
    for _ in range(len(g.nodes) - 1):
        g, _ = delete_nodes(g, 1, rng)
        cur = _evaluate(appendix_source, render_mermaid(g)).recall_ocr
        assert cur <= prev
        prev = cur


def test_oracle_equivalences_on_corpus(corpus):
    for chart in corpus:
        ocr, ve = oracle_backends()
        r = evaluate_reference_free(chart.image, chart.gen_source, ocr, ve)
        r = with_ground_truth(r, chart.actual, chart.generated_elements)
        assert r.recall_ocr == r.recall_actual_text
        assert r.precision_ve == r.precision_actual
        assert r.recall_ocr == pytest.approx(chart.expected_recall_text, abs=1e-12)
        assert r.precision_ve == pytest.approx(chart.expected_precision, abs=1e-12)


def test_ground_truth_report(appendix_source):
    r = ground_truth_report(appendix_source, appendix_source)
    assert (r.recall_actual, r.precision_actual, r.f1_actual) == (1.0, 1.0, 1.0)
    assert r.counts["actual"] == 19


def test_text_recall_ignores_unlabelled_edges(appendix_source):
    actual = decompose(parse_mermaid(appendix_source))
    only_nodes = decompose(parse_mermaid(appendix_source.replace("-->", "---")))
    assert text_recall(actual, only_nodes) == 1.0


def test_report_json_is_deterministic(appendix_source):
    a = _evaluate(appendix_source, appendix_source).to_json()
    b = _evaluate(appendix_source, appendix_source).to_json()
    assert a == b
    assert '"cache_hits"' not in a
