"""Discriminative evaluation of generated graphs against ground truth.

Generated and ground-truth streams are aligned per source node: after
skipping the shared seed prefix, the i-th generated edge of each source is
paired with that source's i-th ground-truth edge.  Node retrieval quality
is then the fraction of pairs whose true destination sits within the top k
of the candidate list the generator recorded when it made the choice, and
edge labels feed a support-weighted precision/recall/F1 report.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass

from ..graph import DyTag, TemporalEdge


@dataclass(frozen=True)
class EdgeAlignment:
    pairs: tuple[tuple[TemporalEdge, TemporalEdge], ...]
    unmatched_generated: int
    unmatched_truth: int


class MissingRecallLogError(KeyError):
    pass


def align_edges(generated: DyTag, truth: DyTag, skip: int = 0) -> EdgeAlignment:
    """Pair post-seed edges of the two streams by source and per-source index."""
    if skip >= generated.num_edges:
        raise ValueError(
            f"skip={skip} leaves no generated edges (|E|={generated.num_edges})"
        )
    gen_edges = generated.edges[skip:]
    true_edges = truth.edges[skip:]

    by_src_gen: dict[str, list[TemporalEdge]] = defaultdict(list)
    for e in gen_edges:
        by_src_gen[e.src].append(e)
    by_src_true: dict[str, list[TemporalEdge]] = defaultdict(list)
    for e in true_edges:
        by_src_true[e.src].append(e)

    pairs: list[tuple[TemporalEdge, TemporalEdge]] = []
    unmatched_gen = 0
    unmatched_true = 0
    for src in sorted(by_src_gen.keys() | by_src_true.keys()):
        gen_list = by_src_gen.get(src, [])
        true_list = by_src_true.get(src, [])
        n = min(len(gen_list), len(true_list))
        pairs.extend(zip(gen_list[:n], true_list[:n]))
        unmatched_gen += len(gen_list) - n
        unmatched_true += len(true_list) - n

    return EdgeAlignment(
        pairs=tuple(pairs),
        unmatched_generated=unmatched_gen,
        unmatched_truth=unmatched_true,
    )


def hit_at_k(
    alignment: EdgeAlignment,
    recall_logs: list[dict[str, object]],
    k: int,
) -> float:
    """Fraction of ground-truth destinations recalled within the top k.

    ``recall_logs`` are the engine's per-edge records keyed by
    (src, source_seq); every matched generated edge must have one.
    Unmatched ground-truth edges count as misses.
    """
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    logs: dict[tuple[str, int], list[str]] = {}
    for entry in recall_logs:
        key = (str(entry["src"]), int(entry["source_seq"]))  # type: ignore[arg-type]
        logs[key] = [str(c) for c in entry["candidates"]]  # type: ignore[union-attr]

    seq: Counter[str] = Counter()
    hits = 0
    for gen_edge, true_edge in alignment.pairs:
        seq[gen_edge.src] += 1
        key = (gen_edge.src, seq[gen_edge.src])
        if key not in logs:
            raise MissingRecallLogError(
                f"no recall log for source {gen_edge.src!r} sequence {seq[gen_edge.src]}"
            )
        candidates = logs[key]
        if true_edge.dst in candidates[:k]:
            hits += 1

    total = len(alignment.pairs) + alignment.unmatched_truth
    if total == 0:
        return 0.0
    return hits / total


def edge_classification_report(alignment: EdgeAlignment) -> dict[str, float]:
    """Support-weighted precision/recall/F1 of generated vs true labels.

    True labels come from the ground-truth side of each pair, predictions
    from the generated side.  Classes never predicted score precision 0.
    """
    if not alignment.pairs:
        raise ValueError("empty alignment: nothing to classify")
    true_labels = [t.label for _, t in alignment.pairs]
    pred_labels = [g.label for g, _ in alignment.pairs]

    support = Counter(true_labels)
    pred_count = Counter(pred_labels)
    correct: Counter[str] = Counter()
    for pred, true in zip(pred_labels, true_labels):
        if pred == true:
            correct[true] += 1

    n = len(true_labels)
    weighted_p = weighted_r = weighted_f1 = 0.0
    for label, count in support.items():
        precision = correct[label] / pred_count[label] if pred_count[label] else 0.0
        recall = correct[label] / count
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        weight = count / n
        weighted_p += weight * precision
        weighted_r += weight * recall
        weighted_f1 += weight * f1

    return {
        "weighted_precision": weighted_p,
        "weighted_recall": weighted_r,
        "weighted_f1": weighted_f1,
    }


def hub_report(
    graph: DyTag,
    top_k: int,
    generated_only: bool = False,
    excerpt_chars: int = 80,
) -> list[dict[str, object]]:
    """Highest-degree nodes with a text excerpt, ties broken by node id."""
    if graph.num_nodes == 0:
        raise ValueError("empty graph has no hubs")
    degree: Counter[str] = Counter()
    for e in graph.edges:
        degree[e.src] += 1
        degree[e.dst] += 1
    records = list(graph.nodes.values())
    if generated_only:
        records = [r for r in records if r.origin.value == "generated"]
    ranked = sorted(records, key=lambda r: (-degree[r.node_id], r.node_id))[:top_k]
    return [
        {
            "node_id": r.node_id,
            "degree": degree[r.node_id],
            "text": r.text[:excerpt_chars],
        }
        for r in ranked
    ]


def discriminative_report(
    generated: DyTag,
    truth: DyTag,
    recall_logs: list[dict[str, object]],
    skip: int = 0,
    hub_top_k: int = 10,
) -> dict[str, object]:
    """The JSON-ready discriminative metric bundle for a graph pair."""
    alignment = align_edges(generated, truth, skip=skip)
    report: dict[str, object] = {
        "matched_pairs": len(alignment.pairs),
        "unmatched_generated": alignment.unmatched_generated,
        "unmatched_truth": alignment.unmatched_truth,
        "hub_table": hub_report(generated, top_k=hub_top_k),
        "generated_hub_table": hub_report(generated, top_k=hub_top_k, generated_only=True),
    }
    if alignment.pairs:
        report["hit1"] = hit_at_k(alignment, recall_logs, k=1)
        report["hit10"] = hit_at_k(alignment, recall_logs, k=10)
        report.update(edge_classification_report(alignment))
    else:
        report["hit1"] = 0.0
        report["hit10"] = 0.0
    return report
