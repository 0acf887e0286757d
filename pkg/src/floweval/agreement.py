"""Agreement between reference-free and ground-truth scores over a corpus."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import stats as sps

from floweval import kernels
from floweval.backends.base import BackendConfig, EntailmentVerdict, ImageRef, VisionBackend
from floweval.backends.ve import DEFAULT_IN_FLIGHT
from floweval.matching import DEFAULT_THRESHOLD, intersect
from floweval.metrics import MetricReport, evaluate_detailed, with_ground_truth
from floweval.mermaid import MermaidError, decompose, parse_mermaid

log = logging.getLogger(__name__)

Scale = Literal["unit", "percent"]
MAX_FAILURE_SHARE = 0.20


class ConstantSeries(ValueError):
    pass


class AllTied(ValueError):
    pass


class NoPositives(ValueError):
    pass


class StudyDegraded(RuntimeError):
    """Too many corpus items failed; ``result`` holds what was computed."""

    def __init__(self, result: StudyResult):
        super().__init__(
            f"{len(result.failures)} of {result.n_items} items failed "
            f"(limit {MAX_FAILURE_SHARE:.0%})"
        )
        self.result = result


@dataclass(frozen=True)
class PairedSeries:
    proxy: tuple[float, ...]
    actual: tuple[float, ...]
    ids: tuple[str, ...] = ()
    scale: Scale = "unit"

    def __post_init__(self):
        if len(self.proxy) != len(self.actual):
            raise ValueError("proxy and actual differ in length")
        if self.ids and len(self.ids) != len(self.proxy):
            raise ValueError("ids do not match series length")
        top = 1.0 if self.scale == "unit" else 100.0
        for v in (*self.proxy, *self.actual):
            if not -1e-9 <= v <= top + 1e-9:
                raise ValueError(f"value {v} outside the {self.scale} scale")

    @classmethod
    def of(cls, proxy, actual, ids=(), scale: Scale = "unit") -> PairedSeries:
        return cls(tuple(map(float, proxy)), tuple(map(float, actual)), tuple(ids), scale)

    def __len__(self) -> int:
        return len(self.proxy)

    def to_percent(self) -> PairedSeries:
        if self.scale == "percent":
            return self
        return PairedSeries(
            tuple(100.0 * v for v in self.proxy), tuple(100.0 * v for v in self.actual), self.ids, "percent"
        )

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.proxy, dtype=np.float64), np.asarray(self.actual, dtype=np.float64)


def pearson(series: PairedSeries) -> float:
    """Sample correlation coefficient."""
    if len(series) < 2:
        raise ValueError("need at least two pairs")
    x, y = series.arrays()
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ConstantSeries("a constant series has no correlation")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def pearson_pvalue(r: float, n: int) -> float:
    """Two-sided p-value of r via the t-transform with n - 2 degrees of freedom."""
    if n < 3:
        return float("nan")
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * sps.t.sf(abs(t), n - 2))


def kendall_tau(series: PairedSeries) -> float:
    """Tau-b, by O(n^2) pair enumeration."""
    if len(series) < 2:
        raise ValueError("need at least two pairs")
    x, y = series.arrays()
    s, tied_x, tied_y = kernels.kendall_counts(x, y)
    n0 = len(series) * (len(series) - 1) // 2
    denom = (n0 - tied_x) * (n0 - tied_y)
    if denom == 0:
        raise AllTied("every pair is tied in at least one series")
    return max(-1.0, min(1.0, s / math.sqrt(denom)))


def rmse_mae(series: PairedSeries) -> tuple[float, float]:
    if len(series) < 1:
        raise ValueError("empty series")
    x, y = series.arrays()
    d = x - y
    return float(np.sqrt(np.mean(d * d))), float(np.mean(np.abs(d)))


@dataclass(frozen=True)
class ConfusionTally:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __add__(self, other: ConfusionTally) -> ConfusionTally:
        return ConfusionTally(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def f1(self) -> float:
        return micro_f1([self])


def micro_f1(tallies: Sequence[ConfusionTally]) -> float:
    """Pool counts across images, then ``2tp / (2tp + fp + fn)``."""
    pooled = sum(tallies, ConfusionTally())
    denom = 2 * pooled.tp + pooled.fp + pooled.fn
    if denom == 0:
        raise NoPositives("no positives and no errors to score")
    return 2 * pooled.tp / denom


def ve_error_rates(
    verdicts: Sequence[EntailmentVerdict], truth: Sequence[bool]
) -> tuple[float | None, float | None, ConfusionTally]:
    """(FPR, FNR, tally); positives are elements truly present in ground truth."""
    if len(verdicts) != len(truth):
        raise ValueError("verdicts and truth differ in length")
    tp = fp = tn = fn = 0
    for v, present in zip(verdicts, truth):
        if present:
            tp += v.entailed
            fn += not v.entailed
        else:
            fp += v.entailed
            tn += not v.entailed
    tally = ConfusionTally(tp, fp, tn, fn)
    fpr = fp / (fp + tn) if fp + tn else None
    fnr = fn / (fn + tp) if fn + tp else None
    return fpr, fnr, tally


@dataclass(frozen=True)
class AgreementReport:
    name: str
    n: int
    pearson_r: float | None = None
    pearson_p: float | None = None
    kendall_tau: float | None = None
    rmse: float | None = None
    mae: float | None = None
    scale: Scale = "percent"
    residuals: tuple[float, ...] = ()
    ids: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()
    tau_variant: str = "b"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["residuals"] = list(self.residuals)
        d["ids"] = list(self.ids)
        d["flags"] = list(self.flags)
        return d


def agreement_report(name: str, series: PairedSeries) -> AgreementReport:
    flags = []
    r = p = tau = None
    rmse = mae = None
    if len(series) >= 2:
        try:
            r = pearson(series)
            p = pearson_pvalue(r, len(series))
        except ConstantSeries:
            flags.append("ConstantSeries")
        try:
            tau = kendall_tau(series)
        except AllTied:
            flags.append("AllTied")
    else:
        flags.append("TooFewPairs")
    if len(series):
        rmse, mae = rmse_mae(series)
    x, y = series.arrays()
    return AgreementReport(
        name=name,
        n=len(series),
        pearson_r=r,
        pearson_p=p,
        kendall_tau=tau,
        rmse=rmse,
        mae=mae,
        scale=series.scale,
        residuals=tuple(float(v) for v in x - y),
        ids=series.ids,
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# Validation study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StudyItem:
    item_id: str
    image: ImageRef | Path
    ground_truth: str | Path
    generated: str | Path

    def load(self) -> tuple[ImageRef, str, str]:
        image = self.image if isinstance(self.image, ImageRef) else ImageRef.from_path(self.image)
        image.digest  # noqa: B018 - forces the read so missing files fail here

        def text(x):
            return x.read_text(encoding="utf-8") if isinstance(x, Path) else x

        return image, text(self.ground_truth), text(self.generated)


@dataclass(frozen=True)
class StudyConfig:
    threshold: float = DEFAULT_THRESHOLD
    scale: Scale = "percent"
    workers: int = 4
    in_flight: int = DEFAULT_IN_FLIGHT
    cache_dir: Path | None = None
    ve_config: BackendConfig | None = None
    ocr_retries: int = 2


@dataclass
class StudyRow:
    item_id: str
    report: MetricReport
    ve_tally: ConfusionTally
    ocr_tally: ConfusionTally


ROW_FIELDS = (
    "id",
    "recall_ocr",
    "recall_actual",
    "precision_ve",
    "precision_actual",
    "f1_ocr_ve",
    "f1_actual",
    "recall_actual_full",
    "f1_actual_full",
    "flags",
)


@dataclass
class StudyResult:
    n_items: int
    rows: list[StudyRow]
    failures: list[tuple[str, str]]
    reports: dict[str, AgreementReport] = field(default_factory=dict)
    ocr_micro_f1: float | None = None
    ocr_tally: ConfusionTally = ConfusionTally()
    ve_micro_f1: float | None = None
    ve_fpr: float | None = None
    ve_fnr: float | None = None
    ve_tally: ConfusionTally = ConfusionTally()
    config: StudyConfig = StudyConfig()

    def series(self, proxy: str, actual: str) -> PairedSeries:
        pairs = [
            (r.item_id, getattr(r.report, proxy), getattr(r.report, actual))
            for r in self.rows
            if getattr(r.report, proxy) is not None and getattr(r.report, actual) is not None
        ]
        s = PairedSeries.of([p for _, p, _ in pairs], [a for _, _, a in pairs], [i for i, _, _ in pairs])
        return s.to_percent() if self.config.scale == "percent" else s

    def summary(self) -> dict:
        def opt(x):
            return None if x is None else float(x)

        return {
            "n_items": self.n_items,
            "n_scored": len(self.rows),
            "n_failed": len(self.failures),
            "failures": [{"id": i, "error": e} for i, e in self.failures],
            "agreement": {k: v.to_dict() for k, v in self.reports.items()},
            "ocr_quality": {"micro_f1": opt(self.ocr_micro_f1), **asdict(self.ocr_tally)},
            "ve_quality": {
                "micro_f1": opt(self.ve_micro_f1),
                "fpr": opt(self.ve_fpr),
                "fnr": opt(self.ve_fnr),
                **asdict(self.ve_tally),
            },
            "metadata": {
                "threshold": self.config.threshold,
                "scale": self.config.scale,
                "kendall_variant": "tau-b",
                "recall_actual": "text-restricted (node labels + edge labels)",
                "f1_actual": "from text-restricted recall and full precision",
            },
        }

    def rows_csv(self) -> str:
        def fmt(x):
            return "" if x is None else repr(float(x))

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ROW_FIELDS)
        for row in self.rows:
            r = row.report
            w.writerow(
                [
                    row.item_id,
                    fmt(r.recall_ocr),
                    fmt(r.recall_actual_text),
                    fmt(r.precision_ve),
                    fmt(r.precision_actual),
                    fmt(r.f1_ocr_ve),
                    fmt(r.f1_actual_text),
                    fmt(r.recall_actual),
                    fmt(r.f1_actual),
                    "|".join(r.flags),
                ]
            )
        return buf.getvalue()

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        summary = out / "summary.json"
        rows = out / "rows.csv"
        summary.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        rows.write_text(self.rows_csv(), encoding="utf-8")
        return summary, rows

    def format_table(self) -> str:
        def num(x):
            return "   -   " if x is None else f"{x:7.3f}"

        lines = [f"{'series':<10} {'n':>4} {'Pearson r':>9} {'Kendall tau':>11} {'RMSE':>8} {'MAE':>8}"]
        for name, rep in self.reports.items():
            lines.append(
                f"{name:<10} {rep.n:>4} {num(rep.pearson_r):>9} {num(rep.kendall_tau):>11} "
                f"{num(rep.rmse):>8} {num(rep.mae):>8}"
                + (f"  [{', '.join(rep.flags)}]" if rep.flags else "")
            )
        lines.append(f"OCR micro-F1 {num(self.ocr_micro_f1)}")
        lines.append(
            f"VE  micro-F1 {num(self.ve_micro_f1)}  FPR {num(self.ve_fpr)}  FNR {num(self.ve_fnr)}"
        )
        lines.append(f"items {self.n_items}, scored {len(self.rows)}, failed {len(self.failures)}")
        return "\n".join(lines)


def _score_item(item: StudyItem, ocr_backend, ve_backend, config: StudyConfig) -> StudyRow:
    image, gt_src, gen_src = item.load()
    actual = decompose(parse_mermaid(gt_src, "lenient"))
    if not actual.keys:
        raise MermaidError("ground truth parses to no elements")
    ev = evaluate_detailed(
        image,
        gen_src,
        ocr_backend,
        ve_backend,
        ve_config=config.ve_config,
        ocr_retries=config.ocr_retries,
        cache_dir=config.cache_dir,
        threshold=config.threshold,
        in_flight=config.in_flight,
        image_id=item.item_id,
    )
    report = with_ground_truth(ev.report, actual, ev.generated)
    truth_idx = intersect(list(ev.generated.keys), list(actual.keys), config.threshold).matched_left
    truth = [i in truth_idx for i in range(len(ev.generated.keys))]
    _, _, ve_tally = ve_error_rates(ev.verdicts, truth)
    gt_text = list(actual.text_elements)
    tp = len(intersect(list(ev.ocr_texts), gt_text, config.threshold))
    ocr_tally = ConfusionTally(tp=tp, fp=len(ev.ocr_texts) - tp, fn=len(gt_text) - tp)
    return StudyRow(item.item_id, report, ve_tally, ocr_tally)


def run_validation_study(
    items: Sequence[StudyItem],
    ocr_backend: VisionBackend,
    ve_backend: VisionBackend,
    config: StudyConfig = StudyConfig(),
    progress: Callable[[str], None] | None = None,
) -> StudyResult:
    """Score every item both ways and measure how well the proxies track truth.

    Failed items are recorded and excluded. Raises :class:`StudyDegraded`
    (carrying the partial result) when more than 20% of items fail.
    """
    rows: list[StudyRow] = []
    failures: list[tuple[str, str]] = []

    def work(item: StudyItem):
        try:
            return _score_item(item, ocr_backend, ve_backend, config), None
        except (OSError, ValueError, RuntimeError) as exc:
            log.warning("item %s failed: %s", item.item_id, exc)
            return None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        for item, (row, err) in zip(items, pool.map(work, items)):
            if row is not None:
                rows.append(row)
            else:
                failures.append((item.item_id, err))
            if progress:
                progress(item.item_id)

    rows.sort(key=lambda r: r.item_id)
    failures.sort()
    result = StudyResult(n_items=len(items), rows=rows, failures=failures, config=config)
    for name, proxy, actual in (
        ("recall", "recall_ocr", "recall_actual_text"),
        ("precision", "precision_ve", "precision_actual"),
        ("f1", "f1_ocr_ve", "f1_actual_text"),
    ):
        result.reports[name] = agreement_report(name, result.series(proxy, actual))

    ocr_tallies = [r.ocr_tally for r in rows]
    ve_tallies = [r.ve_tally for r in rows]
    result.ocr_tally = sum(ocr_tallies, ConfusionTally())
    result.ve_tally = sum(ve_tallies, ConfusionTally())
    try:
        result.ocr_micro_f1 = micro_f1(ocr_tallies)
    except NoPositives:
        pass
    try:
        result.ve_micro_f1 = micro_f1(ve_tallies)
    except NoPositives:
        pass
    t = result.ve_tally
    result.ve_fpr = t.fp / (t.fp + t.tn) if t.fp + t.tn else None
    result.ve_fnr = t.fn / (t.fn + t.tp) if t.fn + t.tp else None

    if items and len(failures) > MAX_FAILURE_SHARE * len(items):
        raise StudyDegraded(result)
    return result
