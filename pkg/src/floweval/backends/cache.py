"""Append-only JSON-lines cache of VE verdicts and OCR results.

Layout: ``<root>/<backend id>/verdicts.jsonl`` and ``.../ocr.jsonl``.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from datetime import datetime, timezone
from pathlib import Path

log = logging.getLogger(__name__)

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]+")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class VerdictCache:
    def __init__(self, root: str | Path, backend_id: str):
        self.backend_id = backend_id
        self.directory = Path(root) / (_UNSAFE.sub("_", backend_id) or "backend")
        self._lock = threading.Lock()
        self._verdicts: dict[tuple[str, str], dict] | None = None
        self._ocr: dict[str, list[str]] | None = None
        self.corrupt_records = 0

    @property
    def verdict_file(self) -> Path:
        return self.directory / "verdicts.jsonl"

    @property
    def ocr_file(self) -> Path:
        return self.directory / "ocr.jsonl"

    def _read(self, path: Path, required: tuple[str, ...]) -> list[dict]:
        if not path.exists():
            return []
        out = []
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    if not isinstance(rec, dict) or any(k not in rec for k in required):
                        raise ValueError("missing fields")
                except ValueError as exc:
                    self.corrupt_records += 1
                    log.warning("CacheCorrupt: %s:%d skipped (%s)", path, lineno, exc)
                    continue
                out.append(rec)
        return out

    def _load(self) -> None:
        if self._verdicts is not None:
            return
        self._verdicts = {}
        for rec in self._read(self.verdict_file, ("digest", "element", "entailed")):
            self._verdicts[(rec["digest"], rec["element"])] = rec
        self._ocr = {}
        for rec in self._read(self.ocr_file, ("digest", "texts")):
            self._ocr[rec["digest"]] = list(rec["texts"])

    def _append(self, path: Path, rec: dict) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    def get(self, digest: str, element: str) -> dict | None:
        with self._lock:
            self._load()
            return self._verdicts.get((digest, element))

    def put(self, digest: str, element: str, entailed: bool, defaulted: bool = False) -> None:
        rec = {
            "digest": digest,
            "element": element,
            "entailed": bool(entailed),
            "defaulted": bool(defaulted),
            "timestamp": _now(),
        }
        with self._lock:
            self._load()
            self._verdicts[(digest, element)] = rec
            self._append(self.verdict_file, rec)

    def get_ocr(self, digest: str) -> list[str] | None:
        with self._lock:
            self._load()
            texts = self._ocr.get(digest)
            return None if texts is None else list(texts)

    def put_ocr(self, digest: str, texts: list[str]) -> None:
        rec = {"digest": digest, "texts": list(texts), "timestamp": _now()}
        with self._lock:
            self._load()
            self._ocr[digest] = list(texts)
            self._append(self.ocr_file, rec)
