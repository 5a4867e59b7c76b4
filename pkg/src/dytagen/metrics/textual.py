"""LLM-judged quality scores for generated texts.

Each sampled edge is packed with both endpoint profiles and an excerpt of
the source's history, then an evaluator model scores it 1-5 on five
criteria: contextual fidelity, personality depth, dynamic adaptability,
immersive quality, and content richness.  Out-of-range integers are
clamped with a warning; malformed replies are retried before failing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from statistics import mean
from typing import Sequence

from ..graph import DyTag, TemporalEdge
from ..llm import ChatConfig, ChatError, ReplyParseError, ResponseCache, chat, parse_agent_json
from ..rng import substream

logger = logging.getLogger(__name__)

CRITERIA = (
    "contextual_fidelity",
    "personality_depth",
    "dynamic_adaptability",
    "immersive_quality",
    "content_richness",
)

_CRITERION_DEFINITIONS = {
    "contextual_fidelity": "how consistent the node/edge texts are with the historical interactions",
    "personality_depth": "how rich and distinctive the semantic and stylistic voice of the profiles is",
    "dynamic_adaptability": "how temporally coherent the evolving textual content is",
    "immersive_quality": "how engaging and realistic the generated narrative reads",
    "content_richness": "how informative, dense, and relevant the interaction text is",
}

HISTORY_EXCERPT_CAP = 1000
DEFAULT_SAMPLE_LIMIT = 200
SCORE_RETRIES = 3


@dataclass(frozen=True)
class TextualSample:
    edge: TemporalEdge
    src_profile: str
    dst_profile: str
    src_history_excerpt: str

    def __post_init__(self) -> None:
        if len(self.src_history_excerpt) > HISTORY_EXCERPT_CAP:
            object.__setattr__(
                self, "src_history_excerpt", self.src_history_excerpt[:HISTORY_EXCERPT_CAP]
            )


@dataclass(frozen=True)
class CriterionScores:
    contextual_fidelity: int
    personality_depth: int
    dynamic_adaptability: int
    immersive_quality: int
    content_richness: int

    def __post_init__(self) -> None:
        for name in CRITERIA:
            value = getattr(self, name)
            if value not in (1, 2, 3, 4, 5):
                raise ValueError(f"{name} must be an integer in 1..5, got {value!r}")

    @property
    def average(self) -> float:
        return mean(getattr(self, name) for name in CRITERIA)


def build_eval_prompt(sample: TextualSample) -> str:
    """One deterministic prompt asking for the five criterion scores as JSON."""
    criteria_block = "\n".join(
        f"- {name}: {definition} (integer 1-5)"
        for name, definition in _CRITERION_DEFINITIONS.items()
    )
    return (
        "You are judging the quality of one generated interaction in an evolving "
        "interaction network.\n\n"
        f"Source profile:\n{sample.src_profile}\n\n"
        f"Destination profile:\n{sample.dst_profile}\n\n"
        f"Source interaction history (excerpt):\n{sample.src_history_excerpt}\n\n"
        f"Interaction under review (label={sample.edge.label!r}, t={sample.edge.timestamp}):\n"
        f"{sample.edge.text}\n\n"
        "Score the interaction on each of the following criteria:\n"
        f"{criteria_block}\n\n"
        "Respond with a single JSON object containing exactly these five keys "
        "and integer values from 1 to 5, for example: "
        '{"contextual_fidelity": 4, "personality_depth": 3, "dynamic_adaptability": 4, '
        '"immersive_quality": 5, "content_richness": 3}'
    )


class ClampTracker:
    """Counts out-of-range scores pulled back into 1..5."""

    def __init__(self) -> None:
        self.count = 0

    def clamp(self, name: str, value: float) -> int:
        clamped = min(5, max(1, int(value)))
        if clamped != value:
            self.count += 1
            logger.warning("clamped %s score %r to %d", name, value, clamped)
        return clamped


def score_sample(
    evaluator: ChatConfig,
    sample: TextualSample,
    clamps: ClampTracker | None = None,
    cache: ResponseCache | None = None,
) -> CriterionScores:
    """Ask the evaluator endpoint to score one sample, retrying bad replies."""
    clamps = clamps if clamps is not None else ClampTracker()
    prompt = build_eval_prompt(sample)
    last_error: Exception | None = None
    for attempt in range(SCORE_RETRIES):
        try:
            reply = chat(evaluator, [{"role": "user", "content": prompt}], cache=cache)
            fields = parse_agent_json(reply, list(CRITERIA))
        except (ChatError, ReplyParseError) as exc:
            last_error = exc
            logger.warning("evaluator attempt %d/%d failed: %s", attempt + 1, SCORE_RETRIES, exc)
            continue
        values: dict[str, int] = {}
        try:
            for name in CRITERIA:
                values[name] = clamps.clamp(name, float(fields[name]))  # type: ignore[arg-type]
        except (TypeError, ValueError) as exc:
            last_error = ReplyParseError(f"non-numeric criterion score: {exc}")
            logger.warning("evaluator reply not numeric (attempt %d): %s", attempt + 1, exc)
            continue
        return CriterionScores(**values)
    raise ChatError(f"evaluator failed after {SCORE_RETRIES} attempts: {last_error}")


def aggregate_scores(scores: Sequence[CriterionScores]) -> dict[str, float]:
    """Per-criterion means plus their overall average."""
    if not scores:
        raise ValueError("no scores to aggregate")
    out: dict[str, float] = {}
    for name in CRITERIA:
        out[name] = mean(getattr(s, name) for s in scores)
    out["average"] = mean(out[name] for name in CRITERIA)
    return out


def sample_edges_for_eval(
    edges: Sequence[TemporalEdge],
    limit: int = DEFAULT_SAMPLE_LIMIT,
    rng_seed: int = 0,
) -> list[TemporalEdge]:
    """Seeded uniform sample of min(limit, len(edges)) edges, stream order kept."""
    if not edges:
        return []
    if len(edges) <= limit:
        return list(edges)
    rng = substream(rng_seed, "textual-sample")
    picks = sorted(rng.choice(len(edges), size=limit, replace=False).tolist())
    return [edges[int(i)] for i in picks]


def build_textual_samples(
    graph: DyTag,
    edges: Sequence[TemporalEdge],
    history_cap: int = HISTORY_EXCERPT_CAP,
) -> list[TextualSample]:
    """Pack sampled edges with profiles and the source's prior history.

    The history excerpt covers the source's outgoing edges strictly before
    the sampled edge in the stream, keeping the most recent ``history_cap``
    characters.
    """
    wanted = {id(e): i for i, e in enumerate(edges)}
    excerpts: dict[int, str] = {}
    running: dict[str, list[str]] = {}
    for e in graph.edges:
        slot = wanted.get(id(e))
        if slot is not None:
            lines = running.get(e.src, [])
            excerpts[slot] = "\n".join(lines)[-history_cap:] if lines else ""
        running.setdefault(e.src, []).append(f"[t={e.timestamp}] {e.label}: {e.text}")

    samples: list[TextualSample] = []
    for i, edge in enumerate(edges):
        samples.append(
            TextualSample(
                edge=edge,
                src_profile=graph.node(edge.src).text,
                dst_profile=graph.node(edge.dst).text,
                src_history_excerpt=excerpts.get(i, ""),
            )
        )
    return samples


def textual_report(
    graph: DyTag,
    evaluator: ChatConfig,
    skip: int = 0,
    limit: int = DEFAULT_SAMPLE_LIMIT,
    rng_seed: int = 0,
    cache: ResponseCache | None = None,
    score_node_profiles: bool = False,
) -> dict[str, object]:
    """Score a seeded sample of post-seed edges and aggregate.

    With ``score_node_profiles`` the generated node profiles are judged as
    well, packed as pseudo-interactions of the node with itself.
    """
    pool = list(graph.edges[skip:])
    sampled = sample_edges_for_eval(pool, limit=limit, rng_seed=rng_seed)
    samples = build_textual_samples(graph, sampled)
    if score_node_profiles:
        for record in graph.nodes.values():
            if record.origin.value != "generated":
                continue
            pseudo = TemporalEdge(
                src=record.node_id, dst=record.node_id, timestamp=0, label="profile",
                text=record.text,
            )
            samples.append(
                TextualSample(
                    edge=pseudo,
                    src_profile=record.text,
                    dst_profile=record.text,
                    src_history_excerpt="",
                )
            )
    clamps = ClampTracker()
    scores = [score_sample(evaluator, s, clamps=clamps, cache=cache) for s in samples]
    report: dict[str, object] = dict(aggregate_scores(scores))
    report["sample_count"] = len(scores)
    report["clamp_warnings"] = clamps.count
    return report
