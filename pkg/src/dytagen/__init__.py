"""dytagen: dynamic text-attributed graph generation and evaluation.

The library grows timestamped, labeled, text-attributed interaction graphs
from a seed prefix with pluggable agent policies (deterministic stubs or a
chat-endpoint-backed policy), and scores generated graphs against ground
truth with structural, embedding, textual, and discriminative metrics.
"""

from .graph import (
    DyTag,
    GraphBuilder,
    NodeRecord,
    Origin,
    Role,
    SeedSplit,
    Side,
    TemporalEdge,
    degree_sequence,
    slice_seed,
)
from .io import load_graph, parse_edge_stream, save_graph, serialize_graph

__version__ = "0.1.0"

__all__ = [
    "DyTag",
    "GraphBuilder",
    "NodeRecord",
    "Origin",
    "Role",
    "SeedSplit",
    "Side",
    "TemporalEdge",
    "__version__",
    "degree_sequence",
    "load_graph",
    "parse_edge_stream",
    "save_graph",
    "serialize_graph",
    "slice_seed",
]
