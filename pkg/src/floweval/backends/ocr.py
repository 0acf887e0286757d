from __future__ import annotations

from dataclasses import dataclass

from floweval.backends.base import BackendError, ImageRef, VisionBackend
from floweval.backends.cache import VerdictCache
from floweval.backends.prompts import ocr_prompt
from floweval.backends.retry import call_with_retries
from floweval.mermaid import canonicalize_label

NO_TEXT_SENTINEL = canonicalize_label("No text found")


@dataclass(frozen=True)
class OcrResult:
    texts: tuple[str, ...]
    flags: tuple[str, ...] = ()
    from_cache: bool = False


def split_ocr_response(response: str) -> list[str]:
    """One canonical text per non-empty line, minus the no-text sentinel."""
    out = []
    for line in response.splitlines():
        text = canonicalize_label(line)
        if text and text != NO_TEXT_SENTINEL:
            out.append(text)
    return out


def ocr_extract(
    image: ImageRef,
    backend: VisionBackend,
    *,
    max_retries: int = 2,
    cache: VerdictCache | None = None,
) -> OcrResult:
    """Run the OCR prompt against ``backend`` and return canonical texts."""
    if cache is not None:
        cached = cache.get_ocr(image.digest)
        if cached is not None:
            return OcrResult(tuple(cached), from_cache=True)
    response = call_with_retries(lambda: backend.infer(image, ocr_prompt()), max_retries)
    flags = () if response.strip() else ("EmptyResponse",)
    texts = split_ocr_response(response)
    if cache is not None:
        cache.put_ocr(image.digest, texts)
    return OcrResult(tuple(texts), flags)


__all__ = ["BackendError", "OcrResult", "ocr_extract", "split_ocr_response"]
