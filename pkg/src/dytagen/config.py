"""Run configuration: one strict, nested JSON document per run.

Unknown keys are rejected rather than ignored, and the fully resolved
configuration is echoed beside every run's outputs, so an offline result
can always be reproduced from its echo alone.  One top-level ``rng_seed``
feeds every stochastic component through labeled substreams.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .engine.core import GenConfig, GenMode, SourceSelection
from .metrics.structural import MmdConfig, SmoothingMode


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PathsConfig:
    edges: str = ""
    nodes: str = ""
    truth_edges: str = ""
    truth_nodes: str = ""
    output_dir: str = "out"


@dataclass(frozen=True)
class GraphConfig:
    bipartite: bool = True


@dataclass(frozen=True)
class GenerationConfig:
    mode: str = "tdgg"
    rounds: int = 20
    edges_per_round: int = 50
    seed_edges: int = 1000
    recall_k: int = 10
    walks: int = 10
    walk_len: int = 10
    memory_cap_chars: int = 1000
    reflection: bool = False
    r_src: int | None = None
    r_dst: int | None = None
    source_selection: str = "replay"
    policy: str = "stub-recency"
    jobs: int = 1


@dataclass(frozen=True)
class MmdSection:
    smoothing: float = 1.0
    smoothing_mode: str = "median_heuristic"


@dataclass(frozen=True)
class EmbeddingConfig:
    k_rows: int = 256
    d_cols: int = 1024
    encoder_dim: int = 256
    precomputed_path: str = ""


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = ""
    model: str = "default"
    api_key: str = ""
    temperature: float = 0.8
    top_p: float = 0.9
    repetition_penalty: float = 1.1
    max_tokens: int = 2000
    timeout_ms: int = 60000
    max_retries: int = 3
    cache_dir: str = ""


@dataclass(frozen=True)
class TextualConfig:
    sample_limit: int = 200
    score_node_profiles: bool = False


@dataclass(frozen=True)
class RunConfig:
    rng_seed: int = 0
    paths: PathsConfig = field(default_factory=PathsConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    mmd: MmdSection = field(default_factory=MmdSection)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)
    textual: TextualConfig = field(default_factory=TextualConfig)

    def gen_config(self) -> GenConfig:
        g = self.generation
        return GenConfig(
            rounds=g.rounds,
            edges_per_round=g.edges_per_round,
            seed_edges=g.seed_edges,
            recall_k=g.recall_k,
            walks=g.walks,
            walk_len=g.walk_len,
            memory_cap_chars=g.memory_cap_chars,
            reflection=g.reflection,
            mode=GenMode(g.mode),
            r_src=g.r_src,
            r_dst=g.r_dst,
            rng_seed=self.rng_seed,
            source_selection=SourceSelection(g.source_selection),
            jobs=g.jobs,
        )

    def mmd_config(self) -> MmdConfig:
        return MmdConfig(
            smoothing=self.mmd.smoothing,
            smoothing_mode=SmoothingMode(self.mmd.smoothing_mode),
        )

    def resolved(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def _build(cls: type, data: dict[str, Any], where: str) -> Any:
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    kwargs: dict[str, Any] = {}
    for name, value in data.items():
        if name in _SECTIONS and cls is RunConfig:
            if not isinstance(value, dict):
                raise ConfigError(f"{where}.{name} must be an object")
            kwargs[name] = _build(_SECTIONS[name], value, f"{where}.{name}")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from None


_SECTIONS: dict[str, type] = {
    "paths": PathsConfig,
    "graph": GraphConfig,
    "generation": GenerationConfig,
    "mmd": MmdSection,
    "embedding": EmbeddingConfig,
    "endpoint": EndpointConfig,
    "textual": TextualConfig,
}


def load_run_config(path: str | Path) -> RunConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ConfigError("run config must be a JSON object")
    config = _build(RunConfig, raw, "config")
    # Fail fast on enum-valued strings.
    GenMode(config.generation.mode)
    SourceSelection(config.generation.source_selection)
    SmoothingMode(config.mmd.smoothing_mode)
    return config


def write_resolved_config(config: RunConfig, directory: str | Path) -> Path:
    out = Path(directory) / "resolved_config.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(config.resolved(), indent=2, sort_keys=True), encoding="utf-8")
    return out
