"""Run configuration: model pool, datasets, seeds, and backend wiring.

A config is a single JSON file shared by every CLI subcommand. Each model
entry is either simulated (a ``sim`` block with solver accuracy and verifier
TPR/FPR) or live (an ``endpoint`` block); per-model simulator seeds derive
from the run seed and the model name, so one integer pins the whole run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .embeddings import EndpointEmbedder, HashingEmbedder
from .engine import (
    Backend,
    DEFAULT_MAX_ATTEMPTS,
    EndpointBackend,
    EvalRunner,
    GenerationCache,
    SimBackend,
)
from .models import ChatEndpoint, EndpointConfig, GenerationParams, ModelSpec, SimModelParams
from .rng import derive_seed
from .store import CACHE_FILE, config_fingerprint


@dataclass(frozen=True)
class ModelEntry:
    spec: ModelSpec
    sim: dict | None = None
    endpoint: EndpointConfig | None = None


@dataclass
class RunConfig:
    run_seed: int
    datasets: list[tuple[str, str]]  # (name, path)
    models: list[ModelEntry]
    solvers: list[str]
    verifiers: list[str]
    samples_per_problem: int = 1
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    report_caps: list[int] = field(default_factory=lambda: [5, DEFAULT_MAX_ATTEMPTS])
    generation: GenerationParams = field(default_factory=GenerationParams)
    max_in_flight: int = 1
    embedding: dict = field(default_factory=lambda: {"provider": "hashing", "dim": 256})
    posttrain_pairs: dict[str, str] = field(default_factory=dict)
    fingerprint: str = ""

    def spec(self, name: str) -> ModelSpec:
        for entry in self.models:
            if entry.spec.name == name:
                return entry.spec
        raise KeyError(f"model {name!r} not in config")

    def specs(self) -> dict[str, ModelSpec]:
        return {entry.spec.name: entry.spec for entry in self.models}


def _parse_model(raw: dict) -> ModelEntry:
    spec = ModelSpec(
        name=raw["name"],
        family=raw["family"],
        size_b=float(raw["size_b"]),
        kind=raw.get("kind", "post-trained"),
    )
    sim = raw.get("sim")
    endpoint_raw = raw.get("endpoint")
    if (sim is None) == (endpoint_raw is None):
        raise ValueError(
            f"model {spec.name!r} needs exactly one of 'sim' or 'endpoint'"
        )
    endpoint = None
    if endpoint_raw is not None:
        endpoint = EndpointConfig(
            base_url=endpoint_raw["base_url"],
            auth_env_var=endpoint_raw.get("auth_env_var"),
            timeout_s=float(endpoint_raw.get("timeout_s", 300.0)),
            max_retries=int(endpoint_raw.get("max_retries", 3)),
            backoff_s=float(endpoint_raw.get("backoff_s", 1.0)),
            supports_seed=bool(endpoint_raw.get("supports_seed", True)),
        )
    return ModelEntry(spec=spec, sim=sim, endpoint=endpoint)


def load_config(path: str | Path) -> RunConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    models = [_parse_model(m) for m in raw["models"]]
    names = [entry.spec.name for entry in models]
    if len(set(names)) != len(names):
        raise ValueError("duplicate model names in config")
    generation_raw = raw.get("generation", {})
    datasets = [(d["name"], d["path"]) for d in raw["datasets"]]
    config = RunConfig(
        run_seed=int(raw.get("run_seed", 0)),
        datasets=datasets,
        models=models,
        solvers=list(raw.get("solvers", names)),
        verifiers=list(raw.get("verifiers", names)),
        samples_per_problem=int(raw.get("samples_per_problem", 1)),
        max_attempts=int(raw.get("max_attempts", DEFAULT_MAX_ATTEMPTS)),
        report_caps=list(raw.get("report_caps", [5, DEFAULT_MAX_ATTEMPTS])),
        generation=GenerationParams(
            temperature=float(generation_raw.get("temperature", 0.7)),
            top_p=float(generation_raw.get("top_p", 0.9)),
            max_tokens=int(generation_raw.get("max_tokens", 8192)),
        ),
        max_in_flight=int(raw.get("max_in_flight", 1)),
        embedding=dict(raw.get("embedding", {"provider": "hashing", "dim": 256})),
        posttrain_pairs=dict(raw.get("posttrain_pairs", {})),
        fingerprint=config_fingerprint(raw),
    )
    unknown = (set(config.solvers) | set(config.verifiers)) - set(names)
    if unknown:
        raise ValueError(f"solvers/verifiers reference unknown models: {sorted(unknown)}")
    return config


def build_runner(config: RunConfig, store_dir: str | Path | None = None) -> EvalRunner:
    cache = None
    if store_dir is not None and any(entry.endpoint for entry in config.models):
        cache = GenerationCache(Path(store_dir) / CACHE_FILE)
    backends: dict[str, Backend] = {}
    for entry in config.models:
        if entry.sim is not None:
            params = SimModelParams(
                solver_accuracy=float(entry.sim["solver_accuracy"]),
                verifier_tpr=float(entry.sim["verifier_tpr"]),
                verifier_fpr=float(entry.sim["verifier_fpr"]),
                seed=derive_seed(config.run_seed, entry.spec.name),
            )
            backends[entry.spec.name] = SimBackend(params)
        else:
            assert entry.endpoint is not None
            backends[entry.spec.name] = EndpointBackend(
                ChatEndpoint(entry.endpoint), run_seed=config.run_seed, cache=cache
            )
    return EvalRunner(backends, max_workers=config.max_in_flight)


def build_embedder(config: RunConfig):
    provider = config.embedding.get("provider", "hashing")
    if provider == "hashing":
        return HashingEmbedder(dim=int(config.embedding.get("dim", 256)))
    if provider == "endpoint":
        return EndpointEmbedder(
            base_url=config.embedding["base_url"],
            model=config.embedding["model"],
            auth_env_var=config.embedding.get("auth_env_var"),
            timeout_s=float(config.embedding.get("timeout_s", 60.0)),
        )
    raise ValueError(f"unknown embedding provider {provider!r}")
