"""Joint structural-temporal-textual graph similarity via random projection.

Each node is summarized by concatenating, per historical interaction in
timestamp order, a (normalized timestamp, edge-text feature, counterpart
node-text feature) triple, then appending the node's own text feature.
These variable-length vectors are mapped into a common space with a seeded
Gaussian random projection (the Johnson-Lindenstrauss route to comparing
embeddings of different lengths), reduced over the node axis with seeded
random signs keyed by node id, and compared by the Frobenius cosine.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, runtime_checkable

import numpy as np

from ..graph import DyTag, NodeRecord, Timestamp, interaction_index
from ..rng import stable_token_hash, substream

DEFAULT_ENCODER_DIM = 256
DEFAULT_D_COLS = 1024
DEFAULT_K_ROWS = 256

_PROJECTION_BLOCK = 1024
_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


@runtime_checkable
class TextEncoder(Protocol):
    """Deterministic text -> fixed-length vector map; '' encodes to zeros."""

    name: str
    dim: int

    def encode(self, text: str) -> np.ndarray: ...


def encode_text_hashed(text: str, dim: int) -> np.ndarray:
    """Feature-hashing encoder: signed token buckets, L2-normalized.

    Tokens are lowercased Unicode word chunks; each is hashed to a bucket
    in [0, dim) with a +-1 sign bit.  The hash is keyed and stable across
    processes.  All-zero outputs (e.g. empty text) are left unnormalized.
    """
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    vec = np.zeros(dim)
    for token in _TOKEN_RE.findall(text.lower()):
        h = stable_token_hash(token)
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        vec[h % dim] += sign
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


class HashingEncoder:
    """Default deterministic fallback encoder."""

    def __init__(self, dim: int = DEFAULT_ENCODER_DIM) -> None:
        self.name = f"hashing-{dim}"
        self.dim = dim

    def encode(self, text: str) -> np.ndarray:
        return encode_text_hashed(text, self.dim)


class PrecomputedEncoder:
    """Encoder backed by a node_id -> vector table (e.g. exported BERT features).

    Node lookups hit the table; texts without a table entry (edge texts,
    unseen nodes) fall back to the hashing encoder at the same width.
    """

    def __init__(self, table: dict[str, np.ndarray], dim: int, name: str = "precomputed") -> None:
        self.name = name
        self.dim = dim
        self._table = table
        self._fallback = HashingEncoder(dim)

    def encode(self, text: str) -> np.ndarray:
        return self._fallback.encode(text)

    def encode_node(self, node: NodeRecord) -> np.ndarray:
        vec = self._table.get(node.node_id)
        if vec is None:
            return self.encode(node.text)
        if len(vec) != self.dim:
            raise ValueError(
                f"precomputed vector for {node.node_id!r} has length {len(vec)}, expected {self.dim}"
            )
        return np.asarray(vec, dtype=float)


def load_precomputed_embeddings(path: str | Path) -> PrecomputedEncoder:
    """Load a line-delimited JSON {"node_id": ..., "vector": [...]} table."""
    table: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            vec = np.asarray(rec["vector"], dtype=float)
            if dim is None:
                dim = len(vec)
            table[str(rec["node_id"])] = vec
    if dim is None:
        raise ValueError(f"no embeddings found in {path}")
    return PrecomputedEncoder(table, dim=dim, name=f"precomputed:{Path(path).name}")


def _node_text_vector(encoder: TextEncoder, node: NodeRecord) -> np.ndarray:
    encode_node = getattr(encoder, "encode_node", None)
    if encode_node is not None:
        return encode_node(node)
    return encoder.encode(node.text)


@dataclass(frozen=True)
class NodeEmbedding:
    node_id: str
    vector: np.ndarray


@dataclass(frozen=True)
class GraphEmbedding:
    matrix: np.ndarray
    projection_seed: int
    k_rows: int
    d_cols: int


def _normalize_time(t: Timestamp, t_min: Timestamp, t_max: Timestamp) -> float:
    if t_max == t_min:
        return 0.0
    return (float(t) - float(t_min)) / (float(t_max) - float(t_min))


def node_embedding(
    graph: DyTag,
    node_id: str,
    encoder: TextEncoder,
    time_range: tuple[Timestamp, Timestamp] | None = None,
) -> NodeEmbedding:
    """Variable-length context vector for one node.

    Length is m * (1 + 2 * encoder.dim) + encoder.dim for a node with m
    interactions.  Timestamps are normalized to [0, 1] over ``time_range``
    (the graph's own range by default); callers comparing two graphs should
    pass the union of both ranges.
    """
    node = graph.node(node_id)
    t_min, t_max = time_range if time_range is not None else graph.time_range()
    parts: list[np.ndarray] = []
    for edge in graph.edges:
        if node_id not in (edge.src, edge.dst):
            continue
        counterpart = graph.node(edge.dst if edge.src == node_id else edge.src)
        parts.append(np.asarray([_normalize_time(edge.timestamp, t_min, t_max)]))
        parts.append(encoder.encode(edge.text))
        parts.append(_node_text_vector(encoder, counterpart))
    parts.append(_node_text_vector(encoder, node))
    return NodeEmbedding(node_id=node_id, vector=np.concatenate(parts))


def _all_node_embeddings(
    graph: DyTag,
    encoder: TextEncoder,
    time_range: tuple[Timestamp, Timestamp] | None,
) -> list[NodeEmbedding]:
    t_min, t_max = time_range if time_range is not None else graph.time_range()
    node_vectors = {nid: _node_text_vector(encoder, rec) for nid, rec in graph.nodes.items()}
    out: list[NodeEmbedding] = []
    history = interaction_index(graph)
    for nid in graph.nodes:
        parts: list[np.ndarray] = []
        for edge, counterpart in history[nid]:
            parts.append(np.asarray([_normalize_time(edge.timestamp, t_min, t_max)]))
            parts.append(encoder.encode(edge.text))
            parts.append(node_vectors[counterpart])
        parts.append(node_vectors[nid])
        out.append(NodeEmbedding(node_id=nid, vector=np.concatenate(parts)))
    return out


def project_vector(vector: np.ndarray, d_cols: int, seed: int) -> np.ndarray:
    """Project one variable-length vector with the shared infinite map."""
    return _project_many([vector], d_cols, seed)[0]


def _projection_block(seed: int, block: int, d_cols: int) -> np.ndarray:
    return substream(seed, "projection", str(block)).standard_normal(
        (_PROJECTION_BLOCK, d_cols)
    )

def _project_many(vectors: Iterable[np.ndarray], d_cols: int, seed: int) -> np.ndarray:
    """Gaussian projection of variable-length vectors into R^d_cols.

    Input coordinate i maps to a Gaussian row drawn deterministically from
    (seed, i), so vectors of any length share one consistent map; rows are
    realized lazily in blocks and never all at once.  Scaled by 1/sqrt(d).
    """
    vecs = list(vectors)
    out = np.zeros((len(vecs), d_cols))
    max_len = max(len(v) for v in vecs)
    n_blocks = -(-max_len // _PROJECTION_BLOCK)
    for b in range(n_blocks):
        lo, hi = b * _PROJECTION_BLOCK, (b + 1) * _PROJECTION_BLOCK
        gauss = _projection_block(seed, b, d_cols)
        for row, vec in enumerate(vecs):
            if len(vec) <= lo:
                continue
            piece = vec[lo:hi]
            out[row] += piece @ gauss[: len(piece)]
    return out / np.sqrt(d_cols)


def _aggregation_signs(seed: int, node_id: str, k_rows: int) -> np.ndarray:
    bits = substream(seed, "aggregate", node_id).integers(0, 2, size=k_rows)
    return bits * 2.0 - 1.0


def graph_embedding(
    graph: DyTag,
    encoder: TextEncoder,
    k_rows: int = DEFAULT_K_ROWS,
    d_cols: int = DEFAULT_D_COLS,
    seed: int = 0,
    time_range: tuple[Timestamp, Timestamp] | None = None,
) -> GraphEmbedding:
    """Fixed-shape (k_rows x d_cols) embedding of a whole graph.

    Stage 1 projects every node's context vector to d_cols columns with the
    seeded Gaussian map.  Stage 2 collapses the node axis: each node gets a
    +-1/sqrt(k_rows) weight per output row keyed by (seed, node_id, row),
    so the result is invariant to node registry enumeration order and two
    graphs embed comparably regardless of node counts.
    """
    if graph.num_nodes == 0:
        raise ValueError("cannot embed an empty graph")
    embeddings = _all_node_embeddings(graph, encoder, time_range)
    projected = _project_many([e.vector for e in embeddings], d_cols, seed)
    signs = np.stack(
        [_aggregation_signs(seed, e.node_id, k_rows) for e in embeddings], axis=1
    )
    matrix = (signs @ projected) / np.sqrt(k_rows)
    return GraphEmbedding(matrix=matrix, projection_seed=seed, k_rows=k_rows, d_cols=d_cols)


def embedding_similarity(generated: GraphEmbedding, truth: GraphEmbedding) -> float:
    """Frobenius cosine similarity in [-1, 1]; 1 means identical direction."""
    if generated.matrix.shape != truth.matrix.shape:
        raise ValueError(
            f"shape mismatch: {generated.matrix.shape} vs {truth.matrix.shape}"
        )
    if generated.projection_seed != truth.projection_seed:
        raise ValueError(
            f"projection seed mismatch: {generated.projection_seed} vs {truth.projection_seed}"
        )
    na = float(np.linalg.norm(generated.matrix))
    nb = float(np.linalg.norm(truth.matrix))
    if na == 0.0 or nb == 0.0:
        raise ValueError("zero-norm embedding matrix")
    return float(np.sum(generated.matrix * truth.matrix) / (na * nb))


def embedding_report(
    generated: DyTag,
    truth: DyTag,
    encoder: TextEncoder | None = None,
    k_rows: int = DEFAULT_K_ROWS,
    d_cols: int = DEFAULT_D_COLS,
    seed: int = 0,
) -> dict[str, object]:
    """Pairwise graph-embedding score over a shared time normalization."""
    encoder = encoder or HashingEncoder()
    g_lo, g_hi = generated.time_range()
    t_lo, t_hi = truth.time_range()
    shared = (min(g_lo, t_lo), max(g_hi, t_hi))
    emb_g = graph_embedding(generated, encoder, k_rows, d_cols, seed, time_range=shared)
    emb_t = graph_embedding(truth, encoder, k_rows, d_cols, seed, time_range=shared)
    score = embedding_similarity(emb_g, emb_t)
    return {
        "graph_embedding_score": score,
        "rho": 1.0 - score,
        "seed": seed,
        "k_rows": k_rows,
        "d_cols": d_cols,
        "encoder": encoder.name,
    }
