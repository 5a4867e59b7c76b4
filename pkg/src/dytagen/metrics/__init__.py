"""Evaluation metrics: structural, embedding, textual, discriminative."""

from .discriminative import (
    EdgeAlignment,
    align_edges,
    discriminative_report,
    edge_classification_report,
    hit_at_k,
    hub_report,
)
from .embedding import (
    GraphEmbedding,
    HashingEncoder,
    NodeEmbedding,
    PrecomputedEncoder,
    TextEncoder,
    embedding_report,
    embedding_similarity,
    encode_text_hashed,
    graph_embedding,
    load_precomputed_embeddings,
    node_embedding,
)
from .structural import (
    DegenerateTailError,
    InsufficientTailError,
    MmdConfig,
    PowerLawFit,
    SmoothingMode,
    degree_mmd,
    fit_power_law,
    mmd_squared,
    normalized_laplacian_spectrum,
    power_law_validity,
    rbf_kernel,
    spectra_mmd,
    structural_report,
)
from .textual import (
    CriterionScores,
    TextualSample,
    aggregate_scores,
    build_eval_prompt,
    build_textual_samples,
    sample_edges_for_eval,
    score_sample,
    textual_report,
)

__all__ = [
    "CriterionScores",
    "DegenerateTailError",
    "EdgeAlignment",
    "GraphEmbedding",
    "HashingEncoder",
    "InsufficientTailError",
    "MmdConfig",
    "NodeEmbedding",
    "PowerLawFit",
    "PrecomputedEncoder",
    "SmoothingMode",
    "TextEncoder",
    "TextualSample",
    "aggregate_scores",
    "align_edges",
    "build_eval_prompt",
    "build_textual_samples",
    "degree_mmd",
    "discriminative_report",
    "edge_classification_report",
    "embedding_report",
    "embedding_similarity",
    "encode_text_hashed",
    "fit_power_law",
    "graph_embedding",
    "hit_at_k",
    "hub_report",
    "load_precomputed_embeddings",
    "mmd_squared",
    "node_embedding",
    "normalized_laplacian_spectrum",
    "power_law_validity",
    "rbf_kernel",
    "sample_edges_for_eval",
    "score_sample",
    "spectra_mmd",
    "structural_report",
    "textual_report",
]
