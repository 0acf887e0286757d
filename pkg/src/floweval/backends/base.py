"""Shared backend types: image references, verdicts, configuration, errors."""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path


class BackendError(RuntimeError):
    """A backend could not produce a usable answer after all retries."""

    def __init__(self, kind: str, attempts: int, detail: str = ""):
        msg = f"{kind} failure after {attempts} attempt(s)"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.kind = kind
        self.attempts = attempts


@dataclass(frozen=True)
class ImageRef:
    """An input image, by path or inline bytes."""

    path: Path | None = None
    inline: bytes | None = field(default=None, repr=False)

    def __post_init__(self):
        if (self.path is None) == (self.inline is None):
            raise ValueError("ImageRef needs exactly one of path or inline bytes")

    @classmethod
    def from_path(cls, path: str | Path) -> ImageRef:
        return cls(path=Path(path))

    @classmethod
    def from_bytes(cls, data: bytes) -> ImageRef:
        return cls(inline=bytes(data))

    @cached_property
    def data(self) -> bytes:
        if self.inline is not None:
            return self.inline
        return self.path.read_bytes()

    @cached_property
    def digest(self) -> str:
        return hashlib.sha256(self.data).hexdigest()


@dataclass(frozen=True)
class EntailmentVerdict:
    element_index: int
    rendered_element: str
    entailed: bool
    batch_id: str
    raw_line: str | None = None
    defaulted: bool = False

    def __post_init__(self):
        if self.defaulted and self.entailed:
            raise ValueError("a defaulted verdict must be 'no'")


@dataclass(frozen=True)
class BackendConfig:
    backend_id: str
    kind: str = "http"
    endpoint: str = ""
    auth_env: str | None = None
    model: str | None = None
    timeout: float = 60.0
    max_retries: int = 2
    batch_size: int = 10
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.batch_size < 3:
            raise ValueError("batch_size must be at least 3")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")


class VisionBackend:
    """One request shape for every model: ``(image, prompt) -> text``.

    Subclasses implement :meth:`_infer`. ``calls`` counts issued requests and
    is safe to read from any thread.
    """

    backend_id = "abstract"

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.calls = 0

    def infer(self, image: ImageRef, prompt: str) -> str:
        with self._lock:
            self.calls += 1
        return self._infer(image, prompt)

    def _infer(self, image: ImageRef, prompt: str) -> str:
        raise NotImplementedError
