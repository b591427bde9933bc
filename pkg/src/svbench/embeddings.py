"""Embedding providers for solution-similarity scoring.

The contract is deliberately tiny: text in, fixed-length real vector out.
``HashingEmbedder`` is a deterministic local provider (hashed bag of tokens)
good enough for simulator runs and tests; ``EndpointEmbedder`` talks to an
OpenAI-compatible ``/embeddings`` route for real models. The provider
identity string is recorded in run manifests.
"""

from __future__ import annotations

import hashlib
import os

import httpx


class HashingEmbedder:
    """Hashed bag-of-tokens embedding: deterministic, offline, fast."""

    def __init__(self, dim: int = 256) -> None:
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim

    @property
    def identity(self) -> str:
        return f"hashing-{self.dim}"

    def embed(self, text: str) -> list[float]:
        vec = [0.0] * self.dim
        for token in text.lower().split():
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "big")
            index = value % self.dim
            sign = 1.0 if (value >> 63) & 1 else -1.0
            vec[index] += sign
        return vec


class EndpointEmbedder:
    """Client for an OpenAI-compatible embeddings endpoint."""

    def __init__(
        self,
        base_url: str,
        model: str,
        auth_env_var: str | None = None,
        timeout_s: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.auth_env_var = auth_env_var
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    @property
    def identity(self) -> str:
        return f"endpoint-{self.model}"

    def embed(self, text: str) -> list[float]:
        headers = {"Content-Type": "application/json"}
        if self.auth_env_var:
            key = os.environ.get(self.auth_env_var, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        response = self._client.post(
            f"{self.base_url}/embeddings",
            json={"model": self.model, "input": text},
            headers=headers,
        )
        response.raise_for_status()
        return [float(x) for x in response.json()["data"][0]["embedding"]]
