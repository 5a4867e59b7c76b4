"""Agent policies: the pluggable decision layer of the generation engine.

A policy chooses a destination (plus timestamp, label, and edge text) for
an active source node, generates brand-new nodes in inductive runs, and
optionally distills memories.  Two deterministic stubs ship for LLM-free
runs and CI; ``LlmPolicy`` drives a chat endpoint and falls back to a stub
after repeated unusable replies.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

from ..graph import NodeRecord, Origin, Role, TemporalEdge, Timestamp
from ..llm import (
    ChatConfig,
    ChatError,
    PromptTemplate,
    ReplyParseError,
    ResponseCache,
    ScenarioTemplates,
    chat,
    parse_agent_json,
    render_template,
    scenario_templates,
)
from ..rng import substream
from .memory import NodeMemory

logger = logging.getLogger(__name__)

GENERATED_ID_DIGITS = 5

_PROFILE_WORDS = (
    "curious", "practical", "meticulous", "adventurous", "frugal",
    "talkative", "analytical", "patient", "skeptical", "enthusiastic",
)


@dataclass(frozen=True)
class AgentAction:
    """A policy's structured pick for one interaction."""

    chosen_dst: str
    timestamp: Timestamp
    label: str
    edge_text: str
    confidence_rank: int  # 1-based position of chosen_dst in the recall list


@dataclass(frozen=True)
class SelectionContext:
    """Everything a policy may consult when selecting a destination."""

    src: NodeRecord
    memory: NodeMemory
    candidates: tuple[NodeRecord, ...]
    src_history: tuple[TemporalEdge, ...]  # edges with this node as source, stream order
    fallback_timestamp: Timestamp
    global_label_mode: str
    label_pool: tuple[str, ...]
    call_key: str
    rng_seed: int


@dataclass(frozen=True)
class NodeGenContext:
    """Inputs for generating one new node."""

    role: Role
    recent_nodes: tuple[NodeRecord, ...]
    call_key: str
    rng_seed: int


@runtime_checkable
class AgentPolicy(Protocol):
    name: str

    def select_destination(self, context: SelectionContext) -> AgentAction: ...

    def generate_node(self, context: NodeGenContext) -> NodeRecord: ...

    def reflect(self, memory: NodeMemory) -> str: ...


def _rank_of(node_id: str, candidates: tuple[NodeRecord, ...]) -> int:
    for i, rec in enumerate(candidates):
        if rec.node_id == node_id:
            return i + 1
    raise ValueError(f"{node_id!r} not among candidates")


def _history_label_mode(history: tuple[TemporalEdge, ...], default: str) -> str:
    if not history:
        return default
    counts = Counter(e.label for e in history)
    top = max(counts.values())
    # Among equally frequent labels, prefer the most recently used one.
    for edge in reversed(history):
        if counts[edge.label] == top:
            return edge.label
    return default  # pragma: no cover - unreachable


def _stub_generate_node(context: NodeGenContext) -> NodeRecord:
    rng = substream(context.rng_seed, "nodegen", context.call_key)
    number = int(rng.integers(0, 10**GENERATED_ID_DIGITS))
    node_id = f"G{number:0{GENERATED_ID_DIGITS}d}"
    traits = [
        _PROFILE_WORDS[int(rng.integers(len(_PROFILE_WORDS)))] for _ in range(2)
    ]
    text = f"Generated {context.role.value} profile {node_id}: {traits[0]} and {traits[1]}."
    return NodeRecord(node_id=node_id, role=context.role, text=text, origin=Origin.GENERATED)


def _stub_reflect(memory: NodeMemory) -> str:
    latest = sorted(
        enumerate(memory.entries), key=lambda pair: (pair[1].timestamp, pair[0])
    )[-3:]
    return "; ".join(entry.label for _, entry in reversed(latest))


class RecencyPolicy:
    """Repeat-your-history stub: the most recent prior destination wins.

    Falls back to recall rank 1 when no prior destination is among the
    candidates.  The label copies the mode of the source's own history
    (ties resolved toward the most recent), and the timestamp is the
    engine-provided fallback, so per-source monotonicity holds by
    construction.
    """

    name = "stub-recency"

    def select_destination(self, context: SelectionContext) -> AgentAction:
        candidate_ids = {rec.node_id for rec in context.candidates}
        chosen: str | None = None
        for edge in reversed(context.src_history):
            if edge.dst in candidate_ids:
                chosen = edge.dst
                break
        if chosen is None:
            chosen = context.candidates[0].node_id
        label = _history_label_mode(context.src_history, context.global_label_mode)
        return AgentAction(
            chosen_dst=chosen,
            timestamp=context.fallback_timestamp,
            label=label,
            edge_text=(
                f"{context.src.node_id} records a {label} interaction with {chosen} "
                f"at t={context.fallback_timestamp}."
            ),
            confidence_rank=_rank_of(chosen, context.candidates),
        )

    def generate_node(self, context: NodeGenContext) -> NodeRecord:
        return _stub_generate_node(context)

    def reflect(self, memory: NodeMemory) -> str:
        return _stub_reflect(memory)


class UniformPolicy:
    """Exploration stub: uniform seeded choice over candidates and labels."""

    name = "stub-uniform"

    def select_destination(self, context: SelectionContext) -> AgentAction:
        rng = substream(context.rng_seed, "uniform-policy", context.call_key)
        idx = int(rng.integers(len(context.candidates)))
        chosen = context.candidates[idx].node_id
        pool = context.label_pool or (context.global_label_mode,)
        label = pool[int(rng.integers(len(pool)))]
        return AgentAction(
            chosen_dst=chosen,
            timestamp=context.fallback_timestamp,
            label=label,
            edge_text=(
                f"{context.src.node_id} tries a {label} interaction with {chosen} "
                f"at t={context.fallback_timestamp}."
            ),
            confidence_rank=idx + 1,
        )

    def generate_node(self, context: NodeGenContext) -> NodeRecord:
        return _stub_generate_node(context)

    def reflect(self, memory: NodeMemory) -> str:
        return _stub_reflect(memory)


STUB_POLICIES = {
    "stub-recency": RecencyPolicy,
    "stub-uniform": UniformPolicy,
}


_INTERACTION_EXAMPLE = (
    '{"interaction": {"item_id": "X001", "timestamp": "12345", '
    '"label": "5", "text": "Exactly what I hoped for; sharing details of my experience."}}'
)

_EXCERPT = 160


def _render_candidates(candidates: tuple[NodeRecord, ...]) -> str:
    return "\n".join(f"- {rec.node_id}: {rec.text[:_EXCERPT]}" for rec in candidates)


def _render_recent_nodes(nodes: tuple[NodeRecord, ...]) -> str:
    if not nodes:
        return "(none yet)"
    return "\n".join(f"- {rec.node_id}: {rec.text[:_EXCERPT]}" for rec in nodes)


def _parse_reply_timestamp(raw: object) -> Timestamp | None:
    if isinstance(raw, bool):
        return None
    if isinstance(raw, (int, float)):
        return raw
    try:
        return int(str(raw).strip())
    except ValueError:
        pass
    try:
        return float(str(raw).strip())
    except ValueError:
        return None


class LlmPolicy:
    """Chat-endpoint-backed policy with a deterministic stub as last resort.

    Each decision gets ``attempts`` chat calls; replies must contain the
    scenario's JSON shape and name a listed candidate.  When every attempt
    fails (endpoint or parse), the stub policy answers instead, so a run
    always completes.
    """

    def __init__(
        self,
        config: ChatConfig,
        templates: ScenarioTemplates | None = None,
        fallback: AgentPolicy | None = None,
        attempts: int = 3,
        cache: ResponseCache | None = None,
    ) -> None:
        self.config = config
        self.templates = templates or scenario_templates("generic")
        self.fallback = fallback or RecencyPolicy()
        self.attempts = attempts
        self.cache = cache
        self.name = f"llm:{config.model}"
        self.fallback_count = 0

    def _chat(self, template: PromptTemplate, slots: dict[str, str]) -> str:
        prompt = render_template(template, slots)
        return chat(self.config, [{"role": "user", "content": prompt}], cache=self.cache)

    def select_destination(self, context: SelectionContext) -> AgentAction:
        slots = {
            "node_info": context.src.text,
            "node_memory": context.memory.prompt_text(),
            "node_items": _render_candidates(context.candidates),
            "interaction_example": _INTERACTION_EXAMPLE,
        }
        candidate_ids = {rec.node_id for rec in context.candidates}
        for attempt in range(self.attempts):
            try:
                reply = self._chat(self.templates.interaction, slots)
                outer = parse_agent_json(reply, {"interaction": dict})
                inner = outer["interaction"]
                assert isinstance(inner, dict)
                for key in ("item_id", "label", "text"):
                    if key not in inner:
                        raise ReplyParseError(f"interaction reply missing key {key!r}")
                chosen = str(inner["item_id"])
                if chosen not in candidate_ids:
                    raise ReplyParseError(f"chosen item {chosen!r} is not a listed candidate")
            except (ChatError, ReplyParseError) as exc:
                logger.warning(
                    "selection attempt %d/%d for %s failed: %s",
                    attempt + 1,
                    self.attempts,
                    context.src.node_id,
                    exc,
                )
                continue
            timestamp = _parse_reply_timestamp(inner.get("timestamp"))
            if timestamp is None:
                timestamp = context.fallback_timestamp
            return AgentAction(
                chosen_dst=chosen,
                timestamp=timestamp,
                label=str(inner["label"]),
                edge_text=str(inner["text"]),
                confidence_rank=_rank_of(chosen, context.candidates),
            )
        self.fallback_count += 1
        logger.warning(
            "all %d selection attempts failed for %s; using %s",
            self.attempts,
            context.src.node_id,
            self.fallback.name,
        )
        return self.fallback.select_destination(context)

    def generate_node(self, context: NodeGenContext) -> NodeRecord:
        slots = {
            "recent_node_info": _render_recent_nodes(context.recent_nodes),
            "role_name": context.role.value,
        }
        for attempt in range(self.attempts):
            try:
                reply = self._chat(self.templates.node_generation, slots)
                outer = parse_agent_json(reply, {"node": dict})
                inner = outer["node"]
                assert isinstance(inner, dict)
                node_id = str(inner.get("node_id", ""))
                if not node_id.startswith("G") or len(node_id) != 1 + GENERATED_ID_DIGITS:
                    raise ReplyParseError(f"generated node_id {node_id!r} not in G+digits form")
                return NodeRecord(
                    node_id=node_id,
                    role=context.role,
                    text=str(inner.get("text", "")),
                    origin=Origin.GENERATED,
                )
            except (ChatError, ReplyParseError) as exc:
                logger.warning(
                    "node generation attempt %d/%d failed: %s", attempt + 1, self.attempts, exc
                )
        self.fallback_count += 1
        return self.fallback.generate_node(context)

    def reflect(self, memory: NodeMemory) -> str:
        slots = {"node_info": memory.node_id, "node_memory": memory.rendered()}
        return self._chat(self.templates.reflection, slots)
