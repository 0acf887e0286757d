from __future__ import annotations

import logging
import time
from typing import Callable, TypeVar

from floweval.backends.base import BackendError

log = logging.getLogger(__name__)
T = TypeVar("T")

RETRY_BACKOFF_S = 0.0


def call_with_retries(fn: Callable[[], T], max_retries: int, kind: str = "transport") -> T:
    """Call ``fn`` up to ``max_retries + 1`` times; wrap the last failure."""
    attempts = 0
    while True:
        attempts += 1
        try:
            return fn()
        except (BackendError, OSError, TimeoutError, ValueError) as exc:
            if attempts > max_retries:
                raise BackendError(kind, attempts, str(exc)) from exc
            log.warning("backend attempt %d failed: %s", attempts, exc)
            if RETRY_BACKOFF_S:
                time.sleep(RETRY_BACKOFF_S * 2 ** (attempts - 1))
