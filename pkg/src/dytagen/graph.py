"""Core data model for dynamic text-attributed graphs.

A graph is a node registry plus a timestamp-ordered stream of labeled,
text-attributed edges.  Instances are immutable after construction and
safe to share across threads; growth happens through :class:`GraphBuilder`,
which re-validates on every append and freezes into a new graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping, Sequence

Timestamp = int | float


class Role(str, Enum):
    SOURCE = "source"
    DESTINATION = "destination"
    BOTH = "both"


class Origin(str, Enum):
    DATASET = "dataset"
    GENERATED = "generated"


class Side(str, Enum):
    """Which endpoint population a per-node statistic ranges over."""

    ALL = "all"
    SOURCE = "source"
    DESTINATION = "destination"


class GraphError(ValueError):
    """Base class for graph construction and validation failures."""


class DuplicateNodeError(GraphError):
    pass


class DanglingEndpointError(GraphError):
    pass


class BipartiteViolationError(GraphError):
    pass


@dataclass(frozen=True)
class NodeRecord:
    node_id: str
    role: Role
    text: str = ""
    origin: Origin = Origin.DATASET


@dataclass(frozen=True)
class TemporalEdge:
    src: str
    dst: str
    timestamp: Timestamp
    label: str = ""
    text: str = ""


class DyTag:
    """Immutable dynamic text-attributed graph.

    Edges are stored in nondecreasing timestamp order; ties keep the
    insertion order of the input sequence.  Multi-edges and self-loops are
    retained as-is.  The node registry preserves first-seen order, so every
    "in registry order" output is deterministic.
    """

    __slots__ = ("_nodes", "_edges", "_bipartite")

    def __init__(
        self,
        nodes: Iterable[NodeRecord],
        edges: Iterable[TemporalEdge],
        bipartite: bool,
    ) -> None:
        registry: dict[str, NodeRecord] = {}
        for record in nodes:
            if record.node_id in registry:
                raise DuplicateNodeError(f"duplicate node_id {record.node_id!r}")
            if bipartite and record.role is Role.BOTH:
                raise BipartiteViolationError(
                    f"node {record.node_id!r} has role 'both' in a bipartite graph"
                )
            registry[record.node_id] = record

        edge_list = list(edges)
        for edge in edge_list:
            _check_edge(edge, registry, bipartite)
        # Stable sort keeps insertion order among equal timestamps.
        edge_list.sort(key=lambda e: e.timestamp)

        self._nodes = registry
        self._edges = tuple(edge_list)
        self._bipartite = bipartite

    @property
    def nodes(self) -> Mapping[str, NodeRecord]:
        return self._nodes

    @property
    def edges(self) -> tuple[TemporalEdge, ...]:
        return self._edges

    @property
    def bipartite(self) -> bool:
        return self._bipartite

    @property
    def num_nodes(self) -> int:
        return len(self._nodes)

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    def node(self, node_id: str) -> NodeRecord:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise DanglingEndpointError(f"unknown node {node_id!r}") from None

    def node_ids(self, role: Role | None = None) -> list[str]:
        """Node ids in registry order, optionally restricted to one role side."""
        if role is None:
            return list(self._nodes)
        if role is Role.SOURCE:
            wanted = {Role.SOURCE, Role.BOTH}
        elif role is Role.DESTINATION:
            wanted = {Role.DESTINATION, Role.BOTH}
        else:
            wanted = {Role.BOTH}
        return [nid for nid, rec in self._nodes.items() if rec.role in wanted]

    def incident_edges(self, node_id: str) -> list[TemporalEdge]:
        """Edges touching the node, in stream (timestamp) order."""
        self.node(node_id)
        return [e for e in self._edges if e.src == node_id or e.dst == node_id]

    def time_range(self) -> tuple[Timestamp, Timestamp]:
        if not self._edges:
            return (0, 0)
        stamps = [e.timestamp for e in self._edges]
        return (min(stamps), max(stamps))

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        kind = "bipartite" if self._bipartite else "general"
        return f"DyTag({kind}, |N|={self.num_nodes}, |E|={self.num_edges})"


def _check_edge(edge: TemporalEdge, registry: Mapping[str, NodeRecord], bipartite: bool) -> None:
    for endpoint in (edge.src, edge.dst):
        if endpoint not in registry:
            raise DanglingEndpointError(
                f"edge ({edge.src!r} -> {edge.dst!r}) references undeclared node {endpoint!r}"
            )
    if bipartite:
        if registry[edge.src].role is not Role.SOURCE:
            raise BipartiteViolationError(
                f"bipartite edge source {edge.src!r} has role {registry[edge.src].role.value!r}"
            )
        if registry[edge.dst].role is not Role.DESTINATION:
            raise BipartiteViolationError(
                f"bipartite edge destination {edge.dst!r} has role {registry[edge.dst].role.value!r}"
            )


@dataclass(frozen=True)
class SeedSplit:
    """Prefix of an edge stream plus its ground-truth continuation.

    ``seed.edges + remainder.edges`` always reproduces the original edge
    sequence.  The seed keeps only incident nodes; the remainder carries the
    full node registry of the original graph.
    """

    seed: DyTag
    remainder: DyTag


def slice_seed(graph: DyTag, n_edges: int) -> SeedSplit:
    """Split the graph into its first ``n_edges`` edges and the rest."""
    if not 0 < n_edges <= graph.num_edges:
        raise ValueError(
            f"n_edges must be in [1, {graph.num_edges}], got {n_edges}"
        )
    head = graph.edges[:n_edges]
    tail = graph.edges[n_edges:]
    incident = {e.src for e in head} | {e.dst for e in head}
    seed_nodes = [rec for nid, rec in graph.nodes.items() if nid in incident]
    seed = DyTag(seed_nodes, head, graph.bipartite)
    remainder = DyTag(graph.nodes.values(), tail, graph.bipartite)
    return SeedSplit(seed=seed, remainder=remainder)


def degree_sequence(graph: DyTag, side: Side | str = Side.ALL) -> list[int]:
    """Per-node edge counts in registry order, multi-edges with multiplicity.

    ``all`` counts every incidence (a self-loop contributes 2), ``source``
    counts out-degree over source-side nodes, ``destination`` in-degree over
    destination-side nodes.  On non-bipartite graphs the directed sides use
    edge direction over nodes whose role admits that side.
    """
    side = Side(side)
    out_deg: dict[str, int] = {nid: 0 for nid in graph.nodes}
    in_deg: dict[str, int] = {nid: 0 for nid in graph.nodes}
    for edge in graph.edges:
        out_deg[edge.src] += 1
        in_deg[edge.dst] += 1

    if side is Side.ALL:
        return [out_deg[nid] + in_deg[nid] for nid in graph.nodes]
    if side is Side.SOURCE:
        return [out_deg[nid] for nid in graph.node_ids(Role.SOURCE)]
    return [in_deg[nid] for nid in graph.node_ids(Role.DESTINATION)]


@dataclass
class GraphBuilder:
    """Mutable accumulator used by the generation engine.

    Appends validate endpoints immediately; :meth:`freeze` produces the
    immutable graph (re-sorting edges stably by timestamp).
    """

    bipartite: bool
    _nodes: dict[str, NodeRecord] = field(default_factory=dict)
    _edges: list[TemporalEdge] = field(default_factory=list)

    @classmethod
    def from_graph(cls, graph: DyTag) -> "GraphBuilder":
        builder = cls(bipartite=graph.bipartite)
        builder._nodes = dict(graph.nodes)
        builder._edges = list(graph.edges)
        return builder

    @property
    def nodes(self) -> Mapping[str, NodeRecord]:
        return self._nodes

    @property
    def edges(self) -> Sequence[TemporalEdge]:
        return self._edges

    def has_node(self, node_id: str) -> bool:
        return node_id in self._nodes

    def add_node(self, record: NodeRecord) -> None:
        if record.node_id in self._nodes:
            raise DuplicateNodeError(f"duplicate node_id {record.node_id!r}")
        if self.bipartite and record.role is Role.BOTH:
            raise BipartiteViolationError(
                f"node {record.node_id!r} has role 'both' in a bipartite graph"
            )
        self._nodes[record.node_id] = record

    def add_edges(self, edges: Iterable[TemporalEdge]) -> None:
        for edge in edges:
            _check_edge(edge, self._nodes, self.bipartite)
            self._edges.append(edge)

    def freeze(self) -> DyTag:
        return DyTag(self._nodes.values(), self._edges, self.bipartite)


def iter_interactions(graph: DyTag, node_id: str) -> Iterator[tuple[TemporalEdge, str]]:
    """Yield (edge, counterpart id) for the node's history in stream order."""
    for edge in graph.incident_edges(node_id):
        counterpart = edge.dst if edge.src == node_id else edge.src
        yield edge, counterpart


def interaction_index(graph: DyTag) -> dict[str, list[tuple[TemporalEdge, str]]]:
    """One-pass (edge, counterpart) history for every node, in stream order.

    A self-loop appears once in its node's history, with the node itself as
    counterpart.
    """
    index: dict[str, list[tuple[TemporalEdge, str]]] = {nid: [] for nid in graph.nodes}
    for edge in graph.edges:
        index[edge.src].append((edge, edge.dst))
        if edge.dst != edge.src:
            index[edge.dst].append((edge, edge.src))
    return index
