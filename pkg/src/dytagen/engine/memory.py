"""Per-node interaction memory built from seeded random walks.

A node's memory records the interactions its agent has "seen": repeated
random walks over the interaction graph collect traversed edges in walk
order, deduplicated by (counterpart, timestamp) and evicted oldest-first
until the rendered text fits the character cap.  An optional reflection
pass asks the policy to distill the entries into a short summary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..graph import DyTag, TemporalEdge, Timestamp, interaction_index
from ..rng import substream

logger = logging.getLogger(__name__)

PROFILE_EXCERPT_CHARS = 100


class MemoryEntry(NamedTuple):
    timestamp: Timestamp
    counterpart: str
    counterpart_excerpt: str
    label: str
    text: str


@dataclass
class NodeMemory:
    node_id: str
    entries: list[MemoryEntry] = field(default_factory=list)
    reflected_summary: str | None = None
    cap_chars: int = 1000

    def rendered(self) -> str:
        """Entries as prompt-ready text, hard-capped at ``cap_chars``."""
        text = "\n".join(
            f"[t={e.timestamp}] {e.label} with {e.counterpart}: {e.text} | {e.counterpart_excerpt}"
            for e in self.entries
        )
        return text[: self.cap_chars]

    def prompt_text(self) -> str:
        if self.reflected_summary:
            return self.reflected_summary
        return self.rendered()

    def max_timestamp(self) -> Timestamp | None:
        if not self.entries:
            return None
        return max(e.timestamp for e in self.entries)


def _excerpt(text: str) -> str:
    return text[:PROFILE_EXCERPT_CHARS]


def build_memory(
    graph: DyTag,
    node_id: str,
    walks: int = 10,
    walk_len: int = 10,
    cap_chars: int = 1000,
    rng: np.random.Generator | None = None,
    rng_seed: int = 0,
    index: dict[str, list[tuple[TemporalEdge, str]]] | None = None,
) -> NodeMemory:
    """Collect a node's memory with ``walks`` random walks of ``walk_len`` steps.

    Each step picks a uniform incident edge of the current node (stream
    order, one draw per step), records it, and moves to the counterpart;
    a walk stops early at a node with no incident edges.  Records are kept
    in walk order, deduplicated by (counterpart, timestamp), then evicted
    oldest-timestamp-first until the rendered text fits the cap.  Passing
    a prebuilt ``index`` avoids re-scanning the edge list per call.
    """
    graph.node(node_id)
    if rng is None:
        rng = substream(rng_seed, "memory", node_id)
    if index is None:
        index = interaction_index(graph)

    collected: list[MemoryEntry] = []
    seen: set[tuple[str, Timestamp]] = set()
    for _ in range(walks):
        cur = node_id
        for _ in range(walk_len):
            history = index.get(cur) or []
            if not history:
                break
            edge, counterpart = history[int(rng.integers(len(history)))]
            key = (counterpart, edge.timestamp)
            if key not in seen:
                seen.add(key)
                counterpart_text = graph.node(counterpart).text
                collected.append(
                    MemoryEntry(
                        timestamp=edge.timestamp,
                        counterpart=counterpart,
                        counterpart_excerpt=_excerpt(counterpart_text),
                        label=edge.label,
                        text=edge.text,
                    )
                )
            cur = counterpart

    memory = NodeMemory(node_id=node_id, entries=collected, cap_chars=cap_chars)
    while len(memory.rendered()) > cap_chars and len(memory.entries) > 1:
        oldest = min(range(len(memory.entries)), key=lambda i: (memory.entries[i].timestamp, i))
        del memory.entries[oldest]
    return memory


def reflect_memory(policy: "AgentPolicy", memory: NodeMemory) -> str:  # noqa: F821
    """Distill the memory into a summary via the policy's reflect hook.

    Empty memories are never sent to the policy.  A policy failure leaves
    the memory unreflected (warning only).  The summary is truncated to the
    memory's character cap and stored on the memory.
    """
    if not memory.entries:
        memory.reflected_summary = ""
        return ""
    try:
        summary = policy.reflect(memory)
    except Exception as exc:
        logger.warning("reflection failed for node %s: %s; using raw memory", memory.node_id, exc)
        memory.reflected_summary = None
        return memory.rendered()
    summary = summary[: memory.cap_chars]
    memory.reflected_summary = summary
    return summary
