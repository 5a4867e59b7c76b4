"""Round-based graph growth for the transductive and inductive tasks.

Both tasks share one round body: activate S source agents, build each a
walk-based memory (optionally reflected), recall up to k candidate
destinations, let the policy pick one and write the interaction, then
commit all S edges at a barrier in canonical (source id, recall rank,
slot) order so outcomes are independent of execution schedule.

The transductive task keeps a fixed node universe and, by default, replays
the ground-truth continuation's source activations round by round.  The
inductive task first generates r_src + r_dst brand-new nodes per round and
samples active sources from the updated universe.
"""

from __future__ import annotations

import logging
import statistics
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from ..graph import (
    DyTag,
    GraphBuilder,
    NodeRecord,
    Role,
    TemporalEdge,
    Timestamp,
    interaction_index,
)
from ..rng import substream
from .memory import NodeMemory, build_memory, reflect_memory
from .policies import AgentAction, AgentPolicy, NodeGenContext, SelectionContext

logger = logging.getLogger(__name__)


class GenMode(str, Enum):
    TDGG = "tdgg"
    IDGG = "idgg"


class SourceSelection(str, Enum):
    REPLAY = "replay"  # replay the ground-truth continuation's sources
    UNIFORM = "uniform"  # seeded uniform sampling over the source universe


@dataclass(frozen=True)
class GenConfig:
    rounds: int = 20
    edges_per_round: int = 50
    seed_edges: int = 1000
    recall_k: int = 10
    walks: int = 10
    walk_len: int = 10
    memory_cap_chars: int = 1000
    reflection: bool = False
    mode: GenMode = GenMode.TDGG
    r_src: int | None = None
    r_dst: int | None = None
    rng_seed: int = 0
    source_selection: SourceSelection = SourceSelection.REPLAY
    jobs: int = 1
    policy_attempts: int = 3

    def __post_init__(self) -> None:
        if self.rounds < 0:
            raise ValueError(f"rounds must be >= 0, got {self.rounds}")
        for name in ("edges_per_round", "recall_k", "walks", "walk_len", "memory_cap_chars"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("r_src", "r_dst"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"{name} must be >= 1 when set, got {value}")


class GenerationError(RuntimeError):
    def __init__(self, message: str, round_index: int) -> None:
        super().__init__(f"round {round_index}: {message}")
        self.round_index = round_index


@dataclass
class GenerationResult:
    graph: DyTag
    recall_logs: list[dict[str, object]]
    status: str = "ok"
    error: str | None = None
    rounds_completed: int = 0
    round_seconds: list[float] = field(default_factory=list)
    policy_retries: int = 0
    timestamp_clamps: int = 0
    r_src: int | None = None
    r_dst: int | None = None
    policy_name: str = ""


def derive_node_rates(seed_graph: DyTag, edges_per_round: int) -> tuple[int, int]:
    """Per-round new-node counts implied by the seed's own growth.

    The seed stream is cut into consecutive complete blocks of
    ``edges_per_round`` edges (the whole stream counts as one block when
    shorter).  A node is new in the block holding its first appearance at
    that endpoint position.  Rates are the per-block means, rounded half
    away from zero and floored at 1.
    """
    if seed_graph.num_edges == 0:
        raise ValueError("cannot derive node rates from an empty seed")
    edges = seed_graph.edges
    n_blocks = max(1, len(edges) // edges_per_round)
    span = n_blocks * edges_per_round if len(edges) >= edges_per_round else len(edges)

    seen_src: set[str] = set()
    seen_dst: set[str] = set()
    new_src_counts = [0] * n_blocks
    new_dst_counts = [0] * n_blocks
    for i, edge in enumerate(edges[:span]):
        block = min(i // edges_per_round, n_blocks - 1)
        if edge.src not in seen_src:
            seen_src.add(edge.src)
            new_src_counts[block] += 1
        if edge.dst not in seen_dst:
            seen_dst.add(edge.dst)
            new_dst_counts[block] += 1

    def rate(counts: list[int]) -> int:
        mean = sum(counts) / len(counts)
        return max(1, int(mean + 0.5))

    return rate(new_src_counts), rate(new_dst_counts)


def recall_candidates(
    graph: DyTag,
    src: str,
    dst_pool: Sequence[str],
    k: int,
    rng: np.random.Generator,
    index: Mapping[str, list[tuple[TemporalEdge, str]]] | None = None,
    degree_order: Sequence[str] | None = None,
    allow_self: bool | None = None,
) -> list[str]:
    """Ranked candidate destinations for a source agent, at most ``k``.

    Slots fill in three stages: previously-interacted destinations by
    recency first, then the highest-degree pool nodes (half of the space
    left, rounded up; ties broken by node id), then a seeded uniform sample
    of the remaining pool.  The source itself is excluded on non-bipartite
    graphs unless the graph already contains self-loops.  ``index``,
    ``degree_order``, and ``allow_self`` may be precomputed by round-based
    callers.
    """
    if not dst_pool:
        raise ValueError("empty destination pool")
    pool = list(dict.fromkeys(dst_pool))
    if allow_self is None:
        allow_self = graph.bipartite or any(e.src == e.dst for e in graph.edges)
    if not allow_self:
        pool = [nid for nid in pool if nid != src]
        if not pool:
            raise ValueError(f"destination pool contains only the source {src!r}")
    pool_set = set(pool)

    if index is None:
        index = interaction_index(graph)
    ranked: list[str] = []
    chosen: set[str] = set()
    for _edge, counterpart in reversed(index.get(src, [])):
        if counterpart in pool_set and counterpart not in chosen:
            ranked.append(counterpart)
            chosen.add(counterpart)
        if len(ranked) >= k:
            return ranked[:k]

    if degree_order is None:
        degree: Counter[str] = Counter()
        for edge in graph.edges:
            degree[edge.src] += 1
            degree[edge.dst] += 1
        degree_order = sorted(pool, key=lambda nid: (-degree[nid], nid))
    remaining_slots = k - len(ranked)
    hub_slots = -(-remaining_slots // 2)  # ceil: half hubs, half exploration
    for nid in degree_order:
        if hub_slots == 0:
            break
        if nid in pool_set and nid not in chosen:
            ranked.append(nid)
            chosen.add(nid)
            hub_slots -= 1

    rest = [nid for nid in degree_order if nid in pool_set and nid not in chosen]
    sample_slots = min(k - len(ranked), len(rest))
    if sample_slots > 0:
        picks = rng.choice(len(rest), size=sample_slots, replace=False)
        ranked.extend(rest[int(i)] for i in picks)
    return ranked


def median_interevent_gap(graph: DyTag) -> float:
    gaps = [
        float(b.timestamp) - float(a.timestamp)
        for a, b in zip(graph.edges, graph.edges[1:])
    ]
    if not gaps:
        return 1.0
    return float(statistics.median(gaps))


@dataclass
class _RoundState:
    """Shared per-round snapshot: built once at the round barrier."""

    view: DyTag
    index: dict[str, list[tuple[TemporalEdge, str]]]
    allow_self: bool = False
    degree_order_cache: dict[tuple[str, ...], list[str]] = field(default_factory=dict)

    def degree_order(self, pool: tuple[str, ...]) -> list[str]:
        cached = self.degree_order_cache.get(pool)
        if cached is None:
            degree: Counter[str] = Counter()
            for edge in self.view.edges:
                degree[edge.src] += 1
                degree[edge.dst] += 1
            cached = sorted(pool, key=lambda nid: (-degree[nid], nid))
            self.degree_order_cache[pool] = cached
        return cached


class _Engine:
    def __init__(self, config: GenConfig, policy: AgentPolicy, seed_graph: DyTag) -> None:
        self.config = config
        self.policy = policy
        self.builder = GraphBuilder.from_graph(seed_graph)
        self.seed_max_ts: Timestamp = seed_graph.edges[-1].timestamp if seed_graph.edges else 0
        self.median_gap = median_interevent_gap(seed_graph)
        self.result = GenerationResult(
            graph=seed_graph, recall_logs=[], policy_name=policy.name
        )
        self.source_seq: Counter[str] = Counter()

    def _global_label_mode(self, view: DyTag) -> str:
        counts = Counter(e.label for e in view.edges)
        if not counts:
            return ""
        top = max(counts.values())
        return sorted(label for label, c in counts.items() if c == top)[0]

    def _fallback_timestamp(self, state: _RoundState, src: str) -> Timestamp:
        history = state.index.get(src) or []
        last = max((e.timestamp for e, _ in history), default=self.seed_max_ts)
        return float(last) + self.median_gap

    def _run_slot(
        self,
        state: _RoundState,
        round_index: int,
        slot: int,
        src: str,
        dst_pool: tuple[str, ...],
        label_pool: tuple[str, ...],
        global_mode: str,
    ) -> tuple[AgentAction, list[str], NodeMemory]:
        cfg = self.config
        slot_key = f"r{round_index}s{slot}"
        memory = build_memory(
            state.view,
            src,
            walks=cfg.walks,
            walk_len=cfg.walk_len,
            cap_chars=cfg.memory_cap_chars,
            rng=substream(cfg.rng_seed, "memory", slot_key, src),
            index=state.index,
        )
        if cfg.reflection:
            reflect_memory(self.policy, memory)
        candidates = recall_candidates(
            state.view,
            src,
            dst_pool,
            k=cfg.recall_k,
            rng=substream(cfg.rng_seed, "recall", slot_key, src),
            index=state.index,
            degree_order=state.degree_order(dst_pool),
            allow_self=state.allow_self,
        )
        candidate_records = tuple(state.view.node(nid) for nid in candidates)
        src_history = tuple(e for e, _ in state.index.get(src, []) if e.src == src)
        fallback_ts = self._fallback_timestamp(state, src)

        action: AgentAction | None = None
        for attempt in range(cfg.policy_attempts):
            context = SelectionContext(
                src=state.view.node(src),
                memory=memory,
                candidates=candidate_records,
                src_history=src_history,
                fallback_timestamp=fallback_ts,
                global_label_mode=global_mode,
                label_pool=label_pool,
                call_key=f"{slot_key}a{attempt}",
                rng_seed=cfg.rng_seed,
            )
            proposed = self.policy.select_destination(context)
            if proposed.chosen_dst in candidates:
                action = proposed
                break
            self.result.policy_retries += 1
            logger.warning(
                "policy chose %r outside the recall list for %s (attempt %d)",
                proposed.chosen_dst,
                src,
                attempt + 1,
            )
        if action is None:
            raise GenerationError(
                f"policy failed to choose a listed candidate for source {src!r} "
                f"after {cfg.policy_attempts} attempts",
                round_index,
            )

        # Floor at the memory's latest timestamp and at the source's own
        # latest outgoing edge, so the per-source edge order in the final
        # stream matches generation order.
        floors = [t for t in (memory.max_timestamp(),) if t is not None]
        floors.extend(e.timestamp for e in src_history[-1:])
        floor = max(floors) if floors else None
        timestamp = action.timestamp
        if floor is not None and timestamp < floor:
            logger.warning(
                "clamping regressed timestamp %s -> %s for source %s",
                timestamp,
                floor,
                src,
            )
            self.result.timestamp_clamps += 1
            timestamp = floor
            action = AgentAction(
                chosen_dst=action.chosen_dst,
                timestamp=timestamp,
                label=action.label,
                edge_text=action.edge_text,
                confidence_rank=action.confidence_rank,
            )
        return action, candidates, memory

    def run_rounds(
        self,
        round_sources: "list[list[str]] | None",
        dst_pool_fn,
        pre_round_fn=None,
    ) -> GenerationResult:
        cfg = self.config
        for k in range(1, cfg.rounds + 1):
            started = time.monotonic()
            if pre_round_fn is not None:
                try:
                    pre_round_fn(k)
                except GenerationError as exc:
                    return self._abort(k - 1, str(exc))
            view = self.builder.freeze()
            state = _RoundState(
                view=view,
                index=interaction_index(view),
                allow_self=view.bipartite or any(e.src == e.dst for e in view.edges),
            )
            label_pool = tuple(sorted({e.label for e in state.view.edges}))
            global_mode = self._global_label_mode(state.view)
            dst_pool = dst_pool_fn(state)

            if round_sources is not None:
                sources = round_sources[k - 1]
            else:
                universe = state.view.node_ids(Role.SOURCE) or list(state.view.nodes)
                rng = substream(cfg.rng_seed, "active-sources", str(k))
                sources = [
                    universe[int(i)]
                    for i in rng.integers(len(universe), size=cfg.edges_per_round)
                ]

            slots = list(enumerate(sources))
            try:
                if cfg.jobs > 1:
                    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                        outcomes = list(
                            pool.map(
                                lambda pair: self._run_slot(
                                    state, k, pair[0], pair[1], dst_pool, label_pool, global_mode
                                ),
                                slots,
                            )
                        )
                else:
                    outcomes = [
                        self._run_slot(state, k, slot, src, dst_pool, label_pool, global_mode)
                        for slot, src in slots
                    ]
            except GenerationError as exc:
                return self._abort(k - 1, str(exc))

            # Barrier commit in canonical order: schedule-independent.
            ordered = sorted(
                zip(slots, outcomes),
                key=lambda pair: (pair[0][1], pair[1][0].confidence_rank, pair[0][0]),
            )
            new_edges = []
            for (slot, src), (action, candidates, _memory) in ordered:
                edge = TemporalEdge(
                    src=src,
                    dst=action.chosen_dst,
                    timestamp=action.timestamp,
                    label=action.label,
                    text=action.edge_text,
                )
                new_edges.append(edge)
                self.source_seq[src] += 1
                self.result.recall_logs.append(
                    {
                        "src": src,
                        "source_seq": self.source_seq[src],
                        "round": k,
                        "slot": slot,
                        "candidates": list(candidates),
                        "chosen": action.chosen_dst,
                        "rank": action.confidence_rank,
                    }
                )
            self.builder.add_edges(new_edges)
            self.result.rounds_completed = k
            self.result.round_seconds.append(time.monotonic() - started)

        self.result.graph = self.builder.freeze()
        return self.result

    def _abort(self, completed: int, message: str) -> GenerationResult:
        logger.error("generation aborted after %d round(s): %s", completed, message)
        self.result.graph = self.builder.freeze()
        self.result.rounds_completed = completed
        self.result.status = "error"
        self.result.error = message
        return self.result


def run_tdgg(
    seed_graph: DyTag,
    ground_truth: DyTag,
    config: GenConfig,
    policy: AgentPolicy,
) -> GenerationResult:
    """Grow the seed over the fixed, fully known node universe.

    The output registry equals the ground truth's; each completed round
    appends exactly ``edges_per_round`` edges.  In replay mode round k's
    active sources are the sources of the ground-truth continuation's k-th
    block, mirroring how the activation sets are derived from the original
    stream.
    """
    if config.mode is not GenMode.TDGG:
        raise ValueError(f"run_tdgg requires mode=tdgg, got {config.mode.value}")
    universe = GraphBuilder(bipartite=ground_truth.bipartite)
    for record in ground_truth.nodes.values():
        universe.add_node(record)
    universe.add_edges(seed_graph.edges)
    base = universe.freeze()

    round_sources: list[list[str]] | None = None
    if config.source_selection is SourceSelection.REPLAY:
        continuation = ground_truth.edges[seed_graph.num_edges :]
        needed = config.rounds * config.edges_per_round
        if len(continuation) < needed:
            raise ValueError(
                f"replay selection needs {needed} continuation edges, "
                f"ground truth provides {len(continuation)}"
            )
        round_sources = [
            [
                e.src
                for e in continuation[
                    (k - 1) * config.edges_per_round : k * config.edges_per_round
                ]
            ]
            for k in range(1, config.rounds + 1)
        ]

    engine = _Engine(config, policy, base)
    if base.bipartite:
        dst_ids = tuple(base.node_ids(Role.DESTINATION))
    else:
        dst_ids = tuple(base.nodes)
    result = engine.run_rounds(round_sources, lambda state: dst_ids)
    return result


def run_idgg(seed_graph: DyTag, config: GenConfig, policy: AgentPolicy) -> GenerationResult:
    """Grow the seed while also generating new nodes every round.

    Each round first creates ``r_src`` source and ``r_dst`` destination
    nodes (ids in G+digits form; duplicate ids are regenerated up to 5
    times), then samples ``edges_per_round`` active sources uniformly from
    the updated source universe.
    """
    if config.mode is not GenMode.IDGG:
        raise ValueError(f"run_idgg requires mode=idgg, got {config.mode.value}")
    r_src, r_dst = config.r_src, config.r_dst
    if r_src is None or r_dst is None:
        r_src, r_dst = derive_node_rates(seed_graph, config.edges_per_round)

    engine = _Engine(config, policy, seed_graph)
    engine.result.r_src, engine.result.r_dst = r_src, r_dst
    new_role_src = Role.SOURCE if seed_graph.bipartite else Role.BOTH
    new_role_dst = Role.DESTINATION if seed_graph.bipartite else Role.BOTH

    recent: list[NodeRecord] = [
        seed_graph.node(nid)
        for nid in dict.fromkeys(
            endpoint
            for e in seed_graph.edges[-10:]
            for endpoint in (e.src, e.dst)
        )
    ]

    def pre_round(k: int) -> None:
        nonlocal recent
        fresh: list[NodeRecord] = []
        batches = ((new_role_src, r_src, "src"), (new_role_dst, r_dst, "dst"))
        for role, count, tag in batches:
            for j in range(count):
                record: NodeRecord | None = None
                for attempt in range(5):
                    context = NodeGenContext(
                        role=role,
                        recent_nodes=tuple(recent),
                        call_key=f"r{k}{tag}{j}a{attempt}",
                        rng_seed=config.rng_seed,
                    )
                    proposal = policy.generate_node(context)
                    if not engine.builder.has_node(proposal.node_id):
                        record = proposal
                        break
                    logger.warning(
                        "generated duplicate node id %r (attempt %d)",
                        proposal.node_id,
                        attempt + 1,
                    )
                if record is None:
                    raise GenerationError(
                        f"could not generate a fresh node id after 5 attempts", k
                    )
                engine.builder.add_node(record)
                fresh.append(record)
        recent = fresh

    def dst_pool(state: _RoundState) -> tuple[str, ...]:
        if state.view.bipartite:
            return tuple(state.view.node_ids(Role.DESTINATION))
        return tuple(state.view.nodes)

    return engine.run_rounds(None, dst_pool, pre_round_fn=pre_round)
