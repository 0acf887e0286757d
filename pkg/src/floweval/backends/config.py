"""Backend configuration files.

INI format, one section per role::

    [ocr]
    id = gemini-ocr
    kind = http
    endpoint = https://example.invalid/v1/chat/completions
    auth_env = OCR_API_KEY
    model = gemini-1.5-pro
    timeout = 60
    retries = 2

    [ve]
    id = oracle
    kind = oracle
    fpr = 0.05
    batch_size = 10

Credentials are never read from the file, only from the variable named by
``auth_env``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from floweval.backends.base import BackendConfig, VisionBackend
from floweval.backends.http import HttpVisionBackend
from floweval.backends.oracle import OracleOcrBackend, OracleVeBackend

_KNOWN = {"id", "kind", "endpoint", "auth_env", "model", "timeout", "retries", "batch_size"}
_FORBIDDEN = {"api_key", "token", "secret", "password"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BackendPair:
    ocr_config: BackendConfig
    ve_config: BackendConfig


def _section(parser: configparser.ConfigParser, name: str) -> BackendConfig:
    if not parser.has_section(name):
        raise ConfigError(f"missing [{name}] section")
    sec = parser[name]
    leaked = _FORBIDDEN & set(sec)
    if leaked:
        raise ConfigError(f"[{name}] holds credential keys {sorted(leaked)}; use auth_env instead")
    try:
        return BackendConfig(
            backend_id=sec.get("id", name),
            kind=sec.get("kind", "http"),
            endpoint=sec.get("endpoint", ""),
            auth_env=sec.get("auth_env") or None,
            model=sec.get("model") or None,
            timeout=sec.getfloat("timeout", 60.0),
            max_retries=sec.getint("retries", 2),
            batch_size=sec.getint("batch_size", 10),
            options={k: v for k, v in sec.items() if k not in _KNOWN},
        )
    except ValueError as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def parse_backend_config(text: str) -> BackendPair:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return BackendPair(_section(parser, "ocr"), _section(parser, "ve"))


def load_backend_config(path: str | Path) -> BackendPair:
    return parse_backend_config(Path(path).read_text(encoding="utf-8"))


def oracle_pair_config(
    fpr: float = 0.0, fnr: float = 0.0, miss_rate: float = 0.0, seed: int = 0, batch_size: int = 10
) -> BackendPair:
    opts = {"fpr": str(fpr), "fnr": str(fnr), "miss_rate": str(miss_rate), "seed": str(seed)}
    return BackendPair(
        BackendConfig("oracle-ocr", kind="oracle", max_retries=0, batch_size=batch_size, options=opts),
        BackendConfig("oracle-ve", kind="oracle", max_retries=0, batch_size=batch_size, options=opts),
    )


def build_backend(config: BackendConfig, role: str, seed: int | None = None) -> VisionBackend:
    """Instantiate the backend for ``role`` ("ocr" or "ve")."""
    if config.kind == "http":
        return HttpVisionBackend(config)
    if config.kind == "oracle":
        opts = config.options
        s = int(opts.get("seed", 0)) if seed is None else seed
        if role == "ocr":
            backend = OracleOcrBackend(miss_rate=float(opts.get("miss_rate", 0.0)), seed=s)
        else:
            backend = OracleVeBackend(
                fpr=float(opts.get("fpr", 0.0)), fnr=float(opts.get("fnr", 0.0)), seed=s
            )
        return backend
    raise ConfigError(f"unknown backend kind {config.kind!r}")
