"""Generation engine: rounds, memories, recall, and agent policies."""

from .core import (
    GenConfig,
    GenerationError,
    GenerationResult,
    GenMode,
    SourceSelection,
    derive_node_rates,
    median_interevent_gap,
    recall_candidates,
    run_idgg,
    run_tdgg,
)
from .memory import MemoryEntry, NodeMemory, build_memory, reflect_memory
from .policies import (
    AgentAction,
    AgentPolicy,
    LlmPolicy,
    NodeGenContext,
    RecencyPolicy,
    STUB_POLICIES,
    SelectionContext,
    UniformPolicy,
)

__all__ = [
    "AgentAction",
    "AgentPolicy",
    "GenConfig",
    "GenerationError",
    "GenerationResult",
    "GenMode",
    "LlmPolicy",
    "MemoryEntry",
    "NodeGenContext",
    "NodeMemory",
    "RecencyPolicy",
    "STUB_POLICIES",
    "SelectionContext",
    "SourceSelection",
    "UniformPolicy",
    "build_memory",
    "derive_node_rates",
    "median_interevent_gap",
    "recall_candidates",
    "reflect_memory",
    "run_idgg",
    "run_tdgg",
]
