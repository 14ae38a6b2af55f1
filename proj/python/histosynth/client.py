"""Minimal client for the synthesis service (``histosynth serve``)."""

from __future__ import annotations

import base64
import json
import urllib.error
import urllib.request
from typing import Sequence

import numpy as np

from ._histosynth import encode_label_png


class ServiceError(RuntimeError):
    def __init__(self, status: int, body: dict):
        super().__init__(f"HTTP {status}: {body.get('error', body)}")
        self.status = status
        self.body = body


class ServiceClient:
    def __init__(self, base_url: str = "http://127.0.0.1:8080", timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _request(self, method: str, path: str, payload: dict | None = None) -> tuple[str, bytes]:
        data = None if payload is None else json.dumps(payload).encode()
        req = urllib.request.Request(self.base_url + path, data=data, method=method)
        if data is not None:
            req.add_header("Content-Type", "application/json")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.headers.get("Content-Type", ""), resp.read()
        except urllib.error.HTTPError as err:
            raise ServiceError(err.code, json.loads(err.read() or b"{}")) from None

    def health(self) -> dict:
        return json.loads(self._request("GET", "/health")[1])

    def models(self) -> list[dict]:
        return json.loads(self._request("GET", "/models")[1])["models"]

    def synthesize(self, labels: np.ndarray, model: str, seed: int | None = None,
                   latent: Sequence[float] | None = None) -> bytes:
        """PNG bytes for a label map; give a seed, an explicit latent, or neither (server default)."""
        body: dict = {"model": model, "label_png": base64.b64encode(encode_label_png(labels)).decode()}
        if seed is not None:
            body["seed"] = int(seed)
        if latent is not None:
            body["latent"] = [float(v) for v in latent]
        return self._request("POST", "/synthesize", body)[1]

    def interpolate(self, labels: np.ndarray, model: str, seeds: tuple[int, int], steps: int) -> list[bytes]:
        body = {
            "model": model,
            "label_png": base64.b64encode(encode_label_png(labels)).decode(),
            "seeds": [int(seeds[0]), int(seeds[1])],
            "steps": int(steps),
        }
        content_type, raw = self._request("POST", "/interpolate", body)
        boundary = content_type.split("boundary=", 1)[1].encode()
        frames = []
        for part in raw.split(b"--" + boundary)[1:]:
            if part.startswith(b"--"):
                break
            _, payload = part.split(b"\r\n\r\n", 1)
            frames.append(payload[: -len(b"\r\n")])
        return frames
