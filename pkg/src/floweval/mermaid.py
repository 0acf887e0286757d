"""Mermaid flowchart parsing and element decomposition.

Only the flowchart subset that image-to-code models actually emit is
understood: a ``flowchart``/``graph`` header, node declarations in the common
bracket shapes, and links (optionally labelled, optionally chained). Styling,
``subgraph``/``end``, ``classDef`` and friends are skipped with a warning.
"""

from __future__ import annotations

import json
import re
import unicodedata
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Literal

Mode = Literal["strict", "lenient"]

DIRECTIONS = ("TD", "TB", "LR", "RL", "BT")
SHAPES = (
    "rectangle",
    "rounded",
    "stadium",
    "diamond",
    "parallelogram",
    "parallelogram_alt",
    "circle",
    "subroutine",
    "unknown",
)
EDGE_STYLES = ("arrow", "open", "dotted", "thick")


class MermaidError(ValueError):
    """Base class for parse failures."""


class EmptyInput(MermaidError):
    pass


class NoFlowchartHeader(MermaidError):
    pass


class MermaidSyntaxError(MermaidError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class ParseWarning:
    line: int
    message: str


@dataclass(frozen=True)
class Node:
    id: str
    label: str
    shape: str = "rectangle"
    implicit: bool = False


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    label: str | None = None
    style: str = "arrow"


@dataclass(frozen=True)
class FlowchartGraph:
    direction: str = "TB"
    nodes: tuple[Node, ...] = ()
    edges: tuple[Edge, ...] = ()
    warnings: tuple[ParseWarning, ...] = ()

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "nodes": [asdict(n) for n in self.nodes],
            "edges": [asdict(e) for e in self.edges],
            "warnings": [asdict(w) for w in self.warnings],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, **kwargs)

    def same_structure(self, other: FlowchartGraph) -> bool:
        """Equality ignoring warnings."""
        return (
            self.direction == other.direction
            and self.nodes == other.nodes
            and self.edges == other.edges
        )


# ---------------------------------------------------------------------------
# Canonicalisation
# ---------------------------------------------------------------------------

_QUOTE_MAP = str.maketrans(
    {
        "~": "'",
        "`": "'",
        "‘": "'",
        "’": "'",
        "‚": "'",
        "‛": "'",
        "′": "'",
        "´": "'",
        "“": '"',
        "”": '"',
        "„": '"',
        "‟": '"',
    }
)
_WS = re.compile(r"\s+")


def _canonical_step(s: str) -> str:
    s = unicodedata.normalize("NFKC", s).translate(_QUOTE_MAP)
    s = _WS.sub(" ", s).strip()
    while len(s) >= 2 and s[0] == '"' and s[-1] == '"':
        s = s[1:-1].strip()
    return s.casefold()


def canonicalize_label(raw: str) -> str:
    """Matching form of a label.

    Outer double quotes are removed, whitespace collapsed, tilde, backtick and
    typographic single quotes become ``'``, and the result is case-folded.
    Iterated to a fixed point so the function is idempotent.
    """
    s = _canonical_step(raw)
    for _ in range(8):
        nxt = _canonical_step(s)
        if nxt == s:
            break
        s = nxt
    return s


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_FENCE = re.compile(r"```[ \t]*(?:mermaid)?[^\n]*\n(.*?)(?:```|\Z)", re.S | re.I)
_HEADER = re.compile(r"^(?:flowchart|graph)(?:\s+([A-Za-z]{2}))?\s*;?\s*$", re.I)
_SKIPPED = re.compile(
    r"^(?:subgraph\b|end\s*;?$|classDef\b|class\b|style\b|linkStyle\b|click\b|direction\b|%%\{)",
    re.I,
)
_ID = re.compile(r"\w+")

# Longest openers first.
_BRACKETS = (
    ("(((", ")))", "unknown"),
    ("([", "])", "stadium"),
    ("[[", "]]", "subroutine"),
    ("((", "))", "circle"),
    ("[(", ")]", "unknown"),
    ("{{", "}}", "unknown"),
    ("[/", "/]", "parallelogram"),
    ("[\\", "\\]", "parallelogram_alt"),
    ("[/", "\\]", "unknown"),
    ("[\\", "/]", "unknown"),
    ("(", ")", "rounded"),
    ("[", "]", "rectangle"),
    ("{", "}", "diamond"),
    (">", "]", "unknown"),
)

_LINK = re.compile(
    r"""\s*(?P<link>
        <?-\.+-[>xo]?            # dotted
      | <?={2,}[>xo=]?           # thick
      | <?-{2,}[>xo]             # arrow
      | -{3,}                    # open
      | ~{3,}                    # invisible, treated as open
    )""",
    re.X,
)
_TEXT_LINK = re.compile(
    r"""\s*(?P<start>--|==|-\.)\s+(?P<text>.+?)\s*(?P<link>-{2,}[>xo]|-{3,}|={2,}[>xo=]|\.+-[>xo]?)""",
    re.X,
)
_PIPE_LABEL = re.compile(r"\s*\|")


def _link_style(token: str) -> str:
    if "." in token:
        return "dotted"
    if "=" in token:
        return "thick"
    if token.endswith((">", "x", "o")):
        return "arrow"
    return "open"


def _decode_entities(s: str) -> str:
    return s.replace("#quot;", '"').replace("#35;", "#")


def extract_code(source: str) -> str:
    """Strip markdown code fences; keep the first fenced block if any."""
    m = _FENCE.search(source)
    return m.group(1) if m else source


class _Scanner:
    """Cursor over one statement."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def node_ref(self) -> tuple[str, str | None, str | None] | None:
        """Parse ``id`` optionally followed by a bracketed label.

        Returns ``(id, label, shape)``; label and shape are None for bare ids.
        """
        self.skip_ws()
        m = _ID.match(self.text, self.pos)
        if not m:
            return None
        node_id = m.group(0)
        self.pos = m.end()
        tried = set()
        for opener, _, _ in _BRACKETS:
            if opener in tried or not self.text.startswith(opener, self.pos):
                continue
            tried.add(opener)
            start = self.pos + len(opener)
            # Same opener, several closers (parallelogram vs trapezoid): earliest close wins.
            best = None
            for op, closer, shape in _BRACKETS:
                if op != opener:
                    continue
                found = self._bracket_body(start, closer)
                if found is not None and (best is None or found[1] < best[1]):
                    best = (found[0], found[1], shape)
            if best is not None:
                self.pos = best[1]
                return node_id, best[0], best[2]
        return node_id, None, None

    def _bracket_body(self, start: int, closer: str) -> tuple[str, int] | None:
        text = self.text
        i = start
        while i < len(text) and text[i] == " ":
            i += 1
        if i < len(text) and text[i] == '"':
            end_quote = text.find('"', i + 1)
            if end_quote != -1:
                j = end_quote + 1
                while j < len(text) and text[j] == " ":
                    j += 1
                if text.startswith(closer, j):
                    return _decode_entities(text[i + 1 : end_quote]).strip(), j + len(closer)
        end = text.find(closer, start)
        if end == -1:
            return None
        return _decode_entities(text[start:end]).strip(), end + len(closer)

    def link(self) -> tuple[str, str | None] | None:
        """Parse a link token; return ``(style, label)``."""
        m = _LINK.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            style = _link_style(m.group("link"))
            return style, self._pipe_label()
        m = _TEXT_LINK.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            token = m.group("start") + m.group("link")
            return _link_style(token), _clean_edge_label(m.group("text"))
        return None

    def _pipe_label(self) -> str | None:
        m = _PIPE_LABEL.match(self.text, self.pos)
        if not m:
            return None
        start = m.end()
        text = self.text
        i = start
        while i < len(text) and text[i] == " ":
            i += 1
        if i < len(text) and text[i] == '"':
            q = text.find('"', i + 1)
            if q != -1:
                bar = text.find("|", q + 1)
                if bar != -1 and not text[q + 1 : bar].strip():
                    self.pos = bar + 1
                    return _clean_edge_label(text[i : q + 1])
        bar = text.find("|", start)
        if bar == -1:
            return None
        self.pos = bar + 1
        return _clean_edge_label(text[start:bar])


def _clean_edge_label(raw: str) -> str | None:
    s = _decode_entities(raw.strip())
    if len(s) >= 2 and s[0] == '"' and s[-1] == '"':
        s = s[1:-1].strip()
    return s or None


def _split_statements(line: str) -> list[str]:
    """Split on ``;`` outside double quotes."""
    out, buf, quoted = [], [], False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        if ch == ";" and not quoted:
            out.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    out.append("".join(buf))
    return [s.strip() for s in out if s.strip()]


class _Builder:
    def __init__(self) -> None:
        self.nodes: dict[str, Node] = {}
        self.edges: list[Edge] = []
        self.warnings: list[ParseWarning] = []

    def touch(self, lineno: int, ref: tuple[str, str | None, str | None]) -> str:
        node_id, label, shape = ref
        existing = self.nodes.get(node_id)
        if label is None:
            if existing is None:
                self.nodes[node_id] = Node(node_id, node_id, "rectangle", implicit=True)
            return node_id
        new = Node(node_id, label, shape or "unknown", implicit=False)
        if existing is not None and not existing.implicit and existing != new:
            self.warnings.append(
                ParseWarning(lineno, f"node {node_id!r} redeclared; last declaration wins")
            )
        self.nodes[node_id] = new
        return node_id

    def statement(self, lineno: int, text: str) -> str | None:
        """Consume one statement; return an error reason or None."""
        sc = _Scanner(text)
        pending: list[tuple[str, str, str | None, str]] = []
        refs = []
        first = sc.node_ref()
        if first is None:
            return "expected a node id"
        refs.append(first)
        while not sc.at_end():
            lk = sc.link()
            if lk is None:
                return f"unexpected text {text[sc.pos:]!r}"
            nxt = sc.node_ref()
            if nxt is None:
                return "link without a target node"
            pending.append((refs[-1][0], nxt[0], lk[1], lk[0]))
            refs.append(nxt)
        for ref in refs:
            self.touch(lineno, ref)
        for src, dst, label, style in pending:
            self.edges.append(Edge(src, dst, label, style))
        return None


def parse_mermaid(source: str, mode: Mode = "lenient") -> FlowchartGraph:
    """Parse Mermaid flowchart text into a :class:`FlowchartGraph`.

    In lenient mode nothing raises: unrecognised lines, missing headers and
    empty input produce warnings. Strict mode raises :class:`EmptyInput`,
    :class:`NoFlowchartHeader` or :class:`MermaidSyntaxError` instead.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown mode {mode!r}")
    strict = mode == "strict"
    if not source or not source.strip():
        if strict:
            raise EmptyInput("empty Mermaid source")
        return FlowchartGraph(warnings=(ParseWarning(0, "empty input"),))

    lines = extract_code(source).splitlines()
    builder = _Builder()
    direction = "TB"

    header_at = None
    for idx, raw in enumerate(lines):
        line = raw.strip()
        if not line or line.startswith("%%"):
            continue
        if _HEADER.match(line):
            header_at = idx
            break
        if strict:
            raise NoFlowchartHeader(f"line {idx + 1}: expected 'flowchart <dir>' header")
    if header_at is None:
        if strict:
            raise NoFlowchartHeader("no 'flowchart' or 'graph' header found")
        builder.warnings.append(ParseWarning(0, "no flowchart header; parsing all lines"))
        body_start = 0
    else:
        for idx in range(header_at):
            if lines[idx].strip() and not lines[idx].strip().startswith("%%"):
                builder.warnings.append(ParseWarning(idx + 1, "leading prose skipped"))
        token = _HEADER.match(lines[header_at].strip()).group(1)
        if token:
            token = token.upper()
            if token in DIRECTIONS:
                direction = token
            elif strict:
                raise MermaidSyntaxError(header_at + 1, f"unknown direction {token!r}")
            else:
                builder.warnings.append(
                    ParseWarning(header_at + 1, f"unknown direction {token!r}; using TB")
                )
        body_start = header_at + 1

    for idx in range(body_start, len(lines)):
        lineno = idx + 1
        line = lines[idx].strip()
        if not line or line.startswith("%%"):
            continue
        if _SKIPPED.match(line):
            builder.warnings.append(ParseWarning(lineno, f"unsupported directive skipped: {line}"))
            continue
        for stmt in _split_statements(line):
            reason = builder.statement(lineno, stmt)
            if reason is None:
                continue
            if strict:
                raise MermaidSyntaxError(lineno, reason)
            builder.warnings.append(ParseWarning(lineno, f"unrecognised line skipped: {reason}"))

    return FlowchartGraph(
        direction=direction,
        nodes=tuple(builder.nodes.values()),
        edges=tuple(builder.edges),
        warnings=tuple(builder.warnings),
    )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_SHAPE_BRACKETS = {
    "rectangle": ("[", "]"),
    "rounded": ("(", ")"),
    "stadium": ("([", "])"),
    "diamond": ("{", "}"),
    "parallelogram": ("[/", "/]"),
    "parallelogram_alt": ("[\\", "\\]"),
    "circle": ("((", "))"),
    "subroutine": ("[[", "]]"),
    "unknown": ("{{", "}}"),
}
_LINK_TOKEN = {"arrow": "-->", "open": "---", "dotted": "-.->", "thick": "==>"}


def _quote(s: str) -> str:
    return '"' + s.replace("#", "#35;").replace('"', "#quot;") + '"'


def render_mermaid(graph: FlowchartGraph) -> str:
    """Serialise a graph back to Mermaid; ``parse_mermaid`` reads it back unchanged."""
    out = [f"flowchart {graph.direction}"]
    for n in graph.nodes:
        if n.implicit:
            out.append(f"    {n.id}")
        else:
            o, c = _SHAPE_BRACKETS[n.shape]
            out.append(f"    {n.id}{o}{_quote(n.label)}{c}")
    for e in graph.edges:
        link = _LINK_TOKEN[e.style]
        label = f"|{_quote(e.label)}|" if e.label else ""
        out.append(f"    {e.src} {link}{label} {e.dst}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------


def render_edge(src: str, dst: str, label: str | None) -> str:
    if label:
        return f"{src} -->|{label}| {dst}"
    return f"{src} --> {dst}"


@dataclass(frozen=True)
class ElementSet:
    """Multiset of evaluation elements of one chart.

    ``rendered`` lists nodes first, then edges, in graph order; ``keys`` is the
    canonical matching form of each rendered element, index-aligned.
    """

    node_labels: tuple[str, ...] = ()
    edge_triples: tuple[tuple[str, str, str], ...] = ()
    rendered: tuple[str, ...] = ()
    keys: tuple[str, ...] = field(default=(), repr=False)

    def __len__(self) -> int:
        return len(self.rendered)

    @property
    def edge_labels(self) -> tuple[str, ...]:
        return tuple(lbl for _, lbl, _ in self.edge_triples if lbl)

    @property
    def text_elements(self) -> tuple[str, ...]:
        """All visible text: node labels then non-empty edge labels (canonical)."""
        return self.node_labels + self.edge_labels

    @property
    def kinds(self) -> tuple[str, ...]:
        return ("node",) * len(self.node_labels) + ("edge",) * len(self.edge_triples)

    def node_counter(self) -> Counter:
        return Counter(self.node_labels)


def decompose(graph: FlowchartGraph) -> ElementSet:
    """Flatten a graph into node labels and label-addressed edge triples.

    Implicit (id-only) nodes are included with their id as label.
    """
    by_id = {n.id: n for n in graph.nodes}
    node_labels = tuple(canonicalize_label(n.label) for n in graph.nodes)
    rendered = [n.label for n in graph.nodes]
    triples = []
    for e in graph.edges:
        src, dst = by_id[e.src].label, by_id[e.dst].label
        triples.append(
            (canonicalize_label(src), canonicalize_label(e.label or ""), canonicalize_label(dst))
        )
        rendered.append(render_edge(src, dst, e.label))
    edge_keys = tuple(render_edge(s, d, lbl or None) for s, lbl, d in triples)
    return ElementSet(
        node_labels=node_labels,
        edge_triples=tuple(triples),
        rendered=tuple(rendered),
        keys=node_labels + edge_keys,
    )
