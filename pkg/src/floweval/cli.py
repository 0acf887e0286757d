"""Command-line entry point.

Exit codes: 0 pass, 1 quality gate failed, 2 Mermaid parse error (strict),
3 I/O or usage error, 4 backend unavailable, 5 validation study degraded.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from floweval import __version__
from floweval.agreement import StudyConfig, StudyDegraded, StudyItem, StudyResult, run_validation_study
from floweval.backends import (
    BackendError,
    BackendPair,
    ConfigError,
    ImageRef,
    build_backend,
    load_backend_config,
)
from floweval.matching import DEFAULT_THRESHOLD
from floweval.mermaid import MermaidError, decompose, parse_mermaid
from floweval.metrics import MetricReport, PARSE_PRODUCED_NOTHING, evaluate_detailed, ground_truth_report, with_ground_truth

EXIT_OK = 0
EXIT_GATE = 1
EXIT_PARSE = 2
EXIT_IO = 3
EXIT_BACKEND = 4
EXIT_STUDY = 5

log = logging.getLogger("floweval")


class CLIError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


class _Parser(argparse.ArgumentParser):
    # Usage errors are operational failures; code 2 is reserved for Mermaid parse errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def _unit_interval(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{v} is outside [0, 1]")
    return v


def _threshold(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"{v} is outside (0, 1]")
    return v


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from exc


def _add_gate_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-recall", type=_unit_interval)
    p.add_argument("--min-precision", type=_unit_interval)
    p.add_argument("--min-f1", type=_unit_interval)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=_threshold, default=DEFAULT_THRESHOLD)
    p.add_argument("--format", choices=("table", "json", "jsonl"), default="table")


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend-config", required=True, help="INI file with [ocr] and [ve] sections")
    p.add_argument("--cache-dir", help="persist OCR results and VE verdicts here")
    p.add_argument("--batch-size", type=int, help="override the VE batch size cap")
    p.add_argument("--seed", type=int, help="seed for oracle backends")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="floweval", description="Reference-free evaluation of flowchart image-to-code output.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("parse", help="parse Mermaid and list its elements")
    p.add_argument("source")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--format", choices=("table", "json"), default="json")

    p = sub.add_parser("evaluate", help="score generated code against its image (quality gate)")
    p.add_argument("image")
    p.add_argument("generated")
    p.add_argument("--ground-truth", help="also compute ground-truth scores")
    p.add_argument("--strict", action="store_true")
    _add_backend_flags(p)
    _add_common(p)
    _add_gate_flags(p)

    p = sub.add_parser("score", help="ground-truth recall/precision/F1")
    p.add_argument("ground_truth")
    p.add_argument("generated")
    p.add_argument("--strict", action="store_true")
    _add_common(p)
    _add_gate_flags(p)

    p = sub.add_parser("validate", help="agreement study over a manifest CSV")
    p.add_argument("manifest")
    _add_backend_flags(p)
    p.add_argument("--threshold", type=_threshold, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", help="output directory (default: <manifest dir>/study)")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--scale", choices=("percent", "unit"), default="percent")
    p.add_argument("--format", choices=("table", "json"), default="table")

    p = sub.add_parser("synth", help="write a seeded synthetic corpus with oracle backend config")
    p.add_argument("out")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _load_backends(args) -> tuple[BackendPair, object, object]:
    try:
        pair = load_backend_config(args.backend_config)
    except OSError as exc:
        raise CLIError(f"cannot read backend config: {exc}", EXIT_IO) from exc
    except ConfigError as exc:
        raise CLIError(f"bad backend config: {exc}", EXIT_IO) from exc
    if args.batch_size is not None:
        try:
            pair = BackendPair(pair.ocr_config, replace(pair.ve_config, batch_size=args.batch_size))
        except ValueError as exc:
            raise CLIError(str(exc), EXIT_IO) from exc
    try:
        ocr = build_backend(pair.ocr_config, "ocr", seed=args.seed)
        ve = build_backend(pair.ve_config, "ve", seed=args.seed)
    except (ConfigError, ValueError) as exc:
        raise CLIError(f"bad backend config: {exc}", EXIT_IO) from exc
    return pair, ocr, ve


def _gates(args) -> dict[str, float]:
    return {
        k: v
        for k, v in (("recall", args.min_recall), ("precision", args.min_precision), ("f1", args.min_f1))
        if v is not None
    }


def _check_gates(values: dict[str, float | None], gates: dict[str, float]) -> list[str]:
    failed = []
    for name, floor in gates.items():
        v = values.get(name)
        if v is None or v < floor:
            failed.append(f"{name}={'absent' if v is None else f'{v:.4f}'} < {floor}")
    return failed


def _fmt(x) -> str:
    return "-" if x is None else f"{x:.4f}"


def _print_report(report: MetricReport, fmt: str, gate_failures: list[str] | None = None) -> None:
    if fmt == "json":
        print(report.to_json())
        return
    if fmt == "jsonl":
        print(report.to_json(indent=None))
        return
    rows = [
        ("Recall_OCR", report.recall_ocr),
        ("Precision_VE", report.precision_ve),
        ("F1_OCR-VE", report.f1_ocr_ve),
        ("Recall_Actual", report.recall_actual),
        ("Precision_Actual", report.precision_actual),
        ("F1_Actual", report.f1_actual),
    ]
    for name, v in rows:
        if v is not None:
            print(f"{name:<18}{_fmt(v)}")
    if report.missed_elements:
        print("missed:")
        for m in report.missed_elements:
            print(f"  - {m}")
    if report.hallucinated_elements:
        print("possibly hallucinated:")
        for h in report.hallucinated_elements:
            print(f"  - {h}")
    if report.flags:
        print(f"flags: {', '.join(report.flags)}")
    if gate_failures:
        print(f"GATE FAILED: {'; '.join(gate_failures)}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_parse(args) -> int:
    text = _read_text(args.source)
    try:
        graph = parse_mermaid(text, "strict" if args.strict else "lenient")
    except MermaidError as exc:
        raise CLIError(f"parse error: {exc}", EXIT_PARSE) from exc
    elements = decompose(graph)
    flags = [] if elements.keys else [PARSE_PRODUCED_NOTHING]
    if args.format == "json":
        doc = {
            "graph": graph.to_dict(),
            "elements": [{"kind": k, "text": t} for k, t in zip(elements.kinds, elements.rendered)],
            "flags": flags,
        }
        print(json.dumps(doc, indent=2, ensure_ascii=False))
    else:
        print(f"direction {graph.direction}: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
        for k, t in zip(elements.kinds, elements.rendered):
            print(f"{k:<5} {t}")
        for w in graph.warnings:
            print(f"warning line {w.line}: {w.message}", file=sys.stderr)
        if flags:
            print(f"flags: {', '.join(flags)}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    source = _read_text(args.generated)
    if args.strict:
        try:
            parse_mermaid(source, "strict")
        except MermaidError as exc:
            raise CLIError(f"parse error: {exc}", EXIT_PARSE) from exc
    image = ImageRef.from_path(args.image)
    try:
        image.digest
    except OSError as exc:
        raise CLIError(f"cannot read image {args.image}: {exc.strerror or exc}", EXIT_IO) from exc
    gt_text = _read_text(args.ground_truth) if args.ground_truth else None
    pair, ocr, ve = _load_backends(args)
    try:
        ev = evaluate_detailed(
            image,
            source,
            ocr,
            ve,
            ve_config=pair.ve_config,
            ocr_retries=pair.ocr_config.max_retries,
            cache_dir=args.cache_dir,
            threshold=args.threshold,
            image_id=Path(args.image).name,
        )
    except BackendError as exc:
        raise CLIError(f"backend error: {exc}", EXIT_BACKEND) from exc
    report = ev.report
    if gt_text is not None:
        report = with_ground_truth(report, decompose(parse_mermaid(gt_text, "lenient")), ev.generated)
    log.info("backend calls %d, cache hits %d", report.backend_calls, report.cache_hits)
    failures = _check_gates(
        {"recall": report.recall_ocr, "precision": report.precision_ve, "f1": report.f1_ocr_ve}, _gates(args)
    )
    _print_report(report, args.format, failures)
    for f in failures:
        print(f"gate failed: {f}", file=sys.stderr)
    return EXIT_GATE if failures else EXIT_OK


def cmd_score(args) -> int:
    gt = _read_text(args.ground_truth)
    gen = _read_text(args.generated)
    if args.strict:
        for label, text in (("ground truth", gt), ("generated", gen)):
            try:
                parse_mermaid(text, "strict")
            except MermaidError as exc:
                raise CLIError(f"{label} parse error: {exc}", EXIT_PARSE) from exc
    report = ground_truth_report(gt, gen, args.threshold, image_id=Path(args.generated).name)
    failures = _check_gates(
        {"recall": report.recall_actual, "precision": report.precision_actual, "f1": report.f1_actual},
        _gates(args),
    )
    _print_report(report, args.format, failures)
    return EXIT_GATE if failures else EXIT_OK


def read_manifest(path: str | Path) -> list[StudyItem]:
    """Manifest CSV with columns ``id,image,ground_truth,generated``.

    Relative paths resolve against the manifest's directory; ``id`` defaults
    to the row number.
    """
    base = Path(path).parent
    text = _read_text(path)
    reader = csv.DictReader(text.splitlines())
    need = {"image", "ground_truth", "generated"}
    if not reader.fieldnames or not need <= set(reader.fieldnames):
        raise CLIError(f"manifest needs columns {sorted(need)}", EXIT_IO)
    items = []
    for n, row in enumerate(reader, 1):
        items.append(
            StudyItem(
                item_id=(row.get("id") or f"row{n:04d}").strip(),
                image=base / row["image"].strip(),
                ground_truth=base / row["ground_truth"].strip(),
                generated=base / row["generated"].strip(),
            )
        )
    return items


def _emit_study(result: StudyResult, args, out: Path) -> None:
    summary, rows = result.write(out)
    if args.format == "json":
        print(json.dumps(result.summary(), indent=2, sort_keys=True))
    else:
        print(result.format_table())
        print(f"wrote {summary} and {rows}")


def cmd_validate(args) -> int:
    items = read_manifest(args.manifest)
    pair, ocr, ve = _load_backends(args)
    out = Path(args.out) if args.out else Path(args.manifest).parent / "study"
    config = StudyConfig(
        threshold=args.threshold,
        scale=args.scale,
        workers=args.workers,
        cache_dir=Path(args.cache_dir) if args.cache_dir else None,
        ve_config=pair.ve_config,
        ocr_retries=pair.ocr_config.max_retries,
    )
    try:
        result = run_validation_study(items, ocr, ve, config)
    except StudyDegraded as exc:
        _emit_study(exc.result, args, out)
        raise CLIError(str(exc), EXIT_STUDY) from exc
    _emit_study(result, args, out)
    for item_id, err in result.failures:
        print(f"skipped {item_id}: {err}", file=sys.stderr)
    return EXIT_OK


ORACLE_CONFIG = """\
[ocr]
id = oracle-ocr
kind = oracle
miss_rate = 0.0
retries = 0

[ve]
id = oracle-ve
kind = oracle
fpr = 0.0
fnr = 0.0
retries = 0
batch_size = 10
"""


def cmd_synth(args) -> int:
    from floweval.synth import synthetic_corpus, write_corpus

    out = Path(args.out)
    try:
        manifest = write_corpus(synthetic_corpus(args.n, args.seed), out)
        (out / "oracle.ini").write_text(ORACLE_CONFIG, encoding="utf-8")
    except OSError as exc:
        raise CLIError(f"cannot write corpus: {exc}", EXIT_IO) from exc
    print(manifest)
    return EXIT_OK


COMMANDS = {
    "parse": cmd_parse,
    "evaluate": cmd_evaluate,
    "score": cmd_score,
    "validate": cmd_validate,
    "synth": cmd_synth,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except CLIError as exc:
        print(f"floweval: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
