"""Seeded synthetic flowcharts with controlled generation errors.

Each :class:`SyntheticChart` pairs a ground-truth graph with a perturbed
"generated" graph (nodes deleted, elements fabricated, or both) and carries
the scores those perturbations imply, worked out from the edit itself rather
than by running the metrics.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from floweval import kernels
from floweval.backends.base import ImageRef
from floweval.matching import DEFAULT_THRESHOLD
from floweval.mermaid import Edge, ElementSet, FlowchartGraph, Node, decompose, render_mermaid

VERBS = (
    "Read", "Validate", "Compute", "Store", "Send", "Check", "Update", "Load", "Parse",
    "Merge", "Sort", "Print", "Fetch", "Encode", "Filter", "Render", "Compare", "Notify",
    "Archive", "Retry", "Queue", "Hash", "Split", "Resize", "Sign", "Lock", "Scan", "Build",
)
NOUNS = (
    "input file", "user record", "checksum", "invoice total", "sensor value", "cart items",
    "session token", "config map", "error log", "queue head", "matrix row", "price list",
    "order status", "audit trail", "image tile", "cache entry", "payload size", "loop index",
    "retry count", "account balance", "shipping label", "graph edge", "tax rate", "form fields",
    "email draft", "report page", "device id", "random seed", "window width", "batch number",
)
EXTRA = (
    "twice", "again", "first", "later", "quickly", "per item", "in place", "by key",
    "safely", "for admin", "from disk", "to server",
)
FABRICATED = (
    "Transmit quarterly zebra manifest", "Polish obsidian lantern", "Invert velvet thermostat",
    "Summon harbor kiwi ledger", "Braid copper violin", "Ferment jade compass",
    "Quarantine marble pelican", "Whisper tundra spreadsheet", "Juggle neon walrus",
    "Calibrate saffron hovercraft", "Decant lunar pretzel", "Tattoo cobalt origami",
)


@dataclass(frozen=True)
class SyntheticChart:
    chart_id: str
    ground_truth: FlowchartGraph
    generated: FlowchartGraph
    kind: str
    deleted: int = 0
    fabricated: int = 0
    expected_recall_text: float = 1.0
    expected_precision: float = 1.0

    @property
    def gt_source(self) -> str:
        return render_mermaid(self.ground_truth)

    @property
    def gen_source(self) -> str:
        return render_mermaid(self.generated)

    @property
    def image(self) -> ImageRef:
        """Stand-in image: the ground-truth source, which the oracle backends read."""
        return ImageRef.from_bytes(self.gt_source.encode("utf-8"))

    @property
    def actual(self) -> ElementSet:
        return decompose(self.ground_truth)

    @property
    def generated_elements(self) -> ElementSet:
        return decompose(self.generated)


def _max_cross_similarity(new: list[str], existing: list[str], floor: float) -> float:
    """Largest similarity if it reaches ``floor``, else some value below it."""
    if not new or not existing:
        return 0.0
    return float(kernels.similarity_matrix(new, existing, floor).max())


def _all_distinct(keys: tuple[str, ...], threshold: float) -> bool:
    if len(keys) < 2:
        return True
    sim = kernels.similarity_matrix(list(keys), list(keys), threshold)
    np.fill_diagonal(sim, 0.0)
    return float(sim.max()) < threshold


def _fresh_label(rng: random.Random, used: list[str], limit: float = 0.75) -> str:
    from floweval.mermaid import canonicalize_label

    for _ in range(500):
        label = f"{rng.choice(VERBS)} {rng.choice(NOUNS)}"
        if rng.random() < 0.5:
            label += f" {rng.choice(EXTRA)}"
        if _max_cross_similarity([canonicalize_label(label)], used, limit) < limit:
            return label
    raise RuntimeError("label vocabulary exhausted")


def random_flowchart(rng: random.Random, n_elements: int, threshold: float = DEFAULT_THRESHOLD) -> FlowchartGraph:
    """A connected chart with exactly ``n_elements`` elements (nodes + edges).

    All element keys are pairwise below ``threshold`` so fuzzy matching is
    unambiguous; decision nodes label their first two out-edges Yes/No.
    """
    if n_elements < 5:
        raise ValueError("need at least 5 elements")
    from floweval.mermaid import canonicalize_label

    for _ in range(50):
        m = (n_elements + 1) // 2
        used: list[str] = []
        labels = []
        for _ in range(m):
            lbl = _fresh_label(rng, used)
            labels.append(lbl)
            used.append(canonicalize_label(lbl))
        labels[0], labels[-1] = "Start", "End"
        pairs: list[tuple[int, int]] = []
        for i in range(1, m):
            pairs.append((rng.randrange(max(0, i - 3), i), i))
        n_extra = n_elements - m - len(pairs)
        existing = set(pairs)
        while n_extra > 0:
            s, d = rng.randrange(m), rng.randrange(m)
            if s != d and (s, d) not in existing and (d, s) not in existing:
                pairs.append((s, d))
                existing.add((s, d))
                n_extra -= 1
        out_deg: dict[int, int] = {}
        edges = []
        for s, d in pairs:
            k = out_deg.get(s, 0)
            out_deg[s] = k + 1
            edges.append([s, d, k])
        decisions = {s for s, deg in out_deg.items() if deg >= 2}
        ids = [f"n{i}" for i in range(m)]
        nodes = []
        for i, lbl in enumerate(labels):
            if i in decisions:
                shape = "diamond"
            elif i in (0, m - 1):
                shape = "stadium"
            else:
                shape = rng.choice(("rectangle", "rectangle", "parallelogram", "rounded"))
            nodes.append(Node(ids[i], lbl, shape))
        graph_edges = tuple(
            Edge(ids[s], ids[d], ("Yes", "No")[k] if s in decisions and k < 2 else None)
            for s, d, k in edges
        )
        graph = FlowchartGraph("TD", tuple(nodes), graph_edges)
        if _all_distinct(decompose(graph).keys, threshold):
            return graph
    raise RuntimeError("could not build a chart with distinct elements")


def delete_nodes(graph: FlowchartGraph, k: int, rng: random.Random) -> tuple[FlowchartGraph, int]:
    """Drop ``k`` nodes and their edges; return the graph and the number of texts lost."""
    victims = set(rng.sample([n.id for n in graph.nodes], k))
    lost = len(victims)
    kept_edges = []
    for e in graph.edges:
        if e.src in victims or e.dst in victims:
            lost += 1 if e.label else 0
        else:
            kept_edges.append(e)
    nodes = tuple(n for n in graph.nodes if n.id not in victims)
    return FlowchartGraph(graph.direction, nodes, tuple(kept_edges)), lost


def fabricate(
    graph: FlowchartGraph,
    k: int,
    rng: random.Random,
    reference: ElementSet,
    threshold: float = DEFAULT_THRESHOLD,
) -> FlowchartGraph:
    """Append ``k`` elements absent from ``reference``.

    Alternates isolated invented nodes and unlabelled edges between existing
    nodes; every added element is checked to stay below ``threshold``
    similarity to all reference elements.
    """
    nodes = list(graph.nodes)
    edges = list(graph.edges)
    known = list(reference.keys)
    by_id = {n.id: n for n in nodes}
    pool = list(FABRICATED)
    rng.shuffle(pool)
    added = 0
    attempts = 0
    while added < k:
        attempts += 1
        if attempts > 5000:
            raise RuntimeError("could not fabricate distinct elements")
        if added % 2 == 0 or len(nodes) < 2:
            label = pool.pop() if pool else f"Invented step {rng.randrange(10**6)} qx"
            cand = decompose(FlowchartGraph(nodes=(Node("x", label),))).keys[0]
            if _max_cross_similarity([cand], known, threshold) >= threshold:
                continue
            node = Node(f"f{len(nodes)}_{added}", label, "rectangle")
            nodes.append(node)
            by_id[node.id] = node
        else:
            s, d = rng.sample(nodes, 2)
            if any(e.src == s.id and e.dst == d.id for e in edges):
                continue
            e = Edge(s.id, d.id)
            cand = decompose(FlowchartGraph(nodes=(s, d), edges=(e,))).keys[-1]
            if _max_cross_similarity([cand], known, threshold) >= threshold:
                continue
            edges.append(e)
        known.append(cand)
        added += 1
    return FlowchartGraph(graph.direction, tuple(nodes), tuple(edges))


def make_chart(
    chart_id: str,
    rng: random.Random,
    n_elements: int,
    delete: int = 0,
    fabricated: int = 0,
) -> SyntheticChart:
    gt = random_flowchart(rng, n_elements)
    actual = decompose(gt)
    n_text = len(actual.text_elements)
    gen, lost = delete_nodes(gt, delete, rng) if delete else (gt, 0)
    n_remaining = len(decompose(gen).keys)
    if fabricated:
        gen = fabricate(gen, fabricated, rng, actual)
    kind = "+".join(
        p for p, on in (("delete", delete), ("fabricate", fabricated)) if on
    ) or "clean"
    return SyntheticChart(
        chart_id=chart_id,
        ground_truth=gt,
        generated=gen,
        kind=kind,
        deleted=delete,
        fabricated=fabricated,
        expected_recall_text=(n_text - lost) / n_text,
        expected_precision=n_remaining / (n_remaining + fabricated),
    )


FABRICATION_CYCLE = (1, 2, 5)


def synthetic_corpus(n: int = 20, seed: int = 0, min_elements: int = 5, max_elements: int = 60) -> list[SyntheticChart]:
    """``n`` charts cycling through clean, deleted, fabricated, and mixed errors."""
    rng = random.Random(seed)
    charts = []
    for i in range(n):
        size = rng.randint(min_elements, max_elements)
        kind = i % 4
        m_nodes = (size + 1) // 2
        delete = rng.randint(1, max(1, min(3, m_nodes - 2))) if kind in (1, 3) else 0
        fab = FABRICATION_CYCLE[(i // 4) % 3] if kind in (2, 3) else 0
        charts.append(make_chart(f"chart{i:03d}", rng, size, delete, fab))
    return charts


def write_corpus(charts: list[SyntheticChart], out_dir: str | Path) -> Path:
    """Write ``<id>.gt.mmd``/``<id>.gen.mmd`` files and a ``manifest.csv``.

    The ground-truth file doubles as the image path, for the oracle backends.
    """
    import csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.csv"
    with manifest.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "image", "ground_truth", "generated"])
        for c in charts:
            gt = out / f"{c.chart_id}.gt.mmd"
            gen = out / f"{c.chart_id}.gen.mmd"
            gt.write_text(c.gt_source, encoding="utf-8")
            gen.write_text(c.gen_source, encoding="utf-8")
            w.writerow([c.chart_id, gt.name, gt.name, gen.name])
    return manifest
