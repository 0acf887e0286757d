"""Generic chat-completions adapter (OpenAI-compatible wire format)."""

from __future__ import annotations

import base64
import json
import os
import urllib.error
import urllib.request

from floweval.backends.base import BackendConfig, BackendError, ImageRef, VisionBackend


def _media_type(data: bytes) -> str:
    if data.startswith(b"\x89PNG"):
        return "image/png"
    if data.startswith(b"\xff\xd8"):
        return "image/jpeg"
    if data[:4] == b"RIFF" and data[8:12] == b"WEBP":
        return "image/webp"
    if data.startswith((b"GIF87a", b"GIF89a")):
        return "image/gif"
    return "application/octet-stream"


class HttpVisionBackend(VisionBackend):
    def __init__(self, config: BackendConfig):
        super().__init__()
        if not config.endpoint:
            raise ValueError(f"backend {config.backend_id!r} has no endpoint")
        self.config = config
        self.backend_id = config.backend_id

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.auth_env:
            token = os.environ.get(self.config.auth_env)
            if not token:
                raise BackendError("auth", 0, f"environment variable {self.config.auth_env} is not set")
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def payload(self, image: ImageRef, prompt: str) -> dict:
        data = image.data
        url = f"data:{_media_type(data)};base64,{base64.b64encode(data).decode('ascii')}"
        body = {
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": prompt},
                        {"type": "image_url", "image_url": {"url": url}},
                    ],
                }
            ],
            "temperature": 0,
        }
        if self.config.model:
            body["model"] = self.config.model
        return body

    def _infer(self, image: ImageRef, prompt: str) -> str:
        req = urllib.request.Request(
            self.config.endpoint,
            data=json.dumps(self.payload(image, prompt)).encode("utf-8"),
            headers=self._headers(),
            method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.config.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except urllib.error.URLError as exc:
            raise OSError(f"{self.config.endpoint}: {exc}") from exc
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ValueError(f"unexpected response shape from {self.config.endpoint}") from exc
        if isinstance(content, list):
            content = "".join(part.get("text", "") for part in content if isinstance(part, dict))
        return str(content)
