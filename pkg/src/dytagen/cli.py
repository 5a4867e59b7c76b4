"""Command-line surface: ingest, slice-seed, generate, evaluate, report.

Every run is reproducible from its resolved-config echo plus the seed:
all randomness fans out from one ``rng_seed`` through labeled substreams.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import click

from . import __version__
from .config import ConfigError, RunConfig, load_run_config, write_resolved_config
from .engine import (
    GenConfig,
    GenMode,
    LlmPolicy,
    STUB_POLICIES,
    run_idgg,
    run_tdgg,
)
from .graph import DyTag, GraphError, slice_seed
from .ingest import DEFAULT_CHUNK_ROWS, stream_ingest
from .io import MalformedRecordError, load_graph, save_graph
from .llm import ChatConfig, ResponseCache
from .metrics import (
    HashingEncoder,
    discriminative_report,
    embedding_report,
    load_precomputed_embeddings,
    structural_report,
    textual_report,
)

logger = logging.getLogger(__name__)

SUITES = ("structural", "embedding", "textual", "discriminative")


def _fail(message: str, code: int = 1) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        _fail(f"{what} not found: {p}", code=2)
    return p


@click.group()
@click.version_option(version=__version__, prog_name="dytagen")
def main() -> None:
    """Generate and evaluate dynamic text-attributed graphs."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("edge_path")
@click.argument("node_path")
@click.option("--out-dir", default="ingested", show_default=True)
@click.option("--bipartite/--no-bipartite", default=True, show_default=True)
@click.option(
    "--chunk-rows",
    default=DEFAULT_CHUNK_ROWS,
    show_default=True,
    help="Rows buffered per sort run; bounds peak memory.",
)
def ingest(edge_path: str, node_path: str, out_dir: str, bipartite: bool, chunk_rows: int) -> None:
    """Validate raw files and write canonical graph files plus stats."""
    _require_file(edge_path, "edge file")
    _require_file(node_path, "node file")
    try:
        stats = stream_ingest(edge_path, node_path, out_dir, bipartite, chunk_rows=chunk_rows)
    except MalformedRecordError as exc:
        _fail(str(exc))
    stats_path = Path(out_dir) / "stats.json"
    stats_path.write_text(json.dumps(stats, indent=2), encoding="utf-8")
    click.echo(json.dumps(stats, indent=2))


@main.command("slice-seed")
@click.argument("edge_path")
@click.argument("node_path")
@click.option("--n-edges", default=1000, show_default=True)
@click.option("--out-dir", default="seeded", show_default=True)
@click.option("--bipartite/--no-bipartite", default=True, show_default=True)
def slice_seed_cmd(edge_path: str, node_path: str, n_edges: int, out_dir: str, bipartite: bool) -> None:
    """Split a graph into its first N edges (the seed) and the remainder."""
    _require_file(edge_path, "edge file")
    _require_file(node_path, "node file")
    try:
        graph = load_graph(edge_path, node_path, bipartite)
        split = slice_seed(graph, n_edges)
    except (GraphError, MalformedRecordError, ValueError) as exc:
        _fail(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_graph(split.seed, out / "seed.edges.csv", out / "seed.nodes.csv")
    save_graph(split.remainder, out / "remainder.edges.csv", out / "remainder.nodes.csv")
    click.echo(
        json.dumps(
            {
                "seed_edges": split.seed.num_edges,
                "seed_nodes": split.seed.num_nodes,
                "remainder_edges": split.remainder.num_edges,
            }
        )
    )


def _build_policy(config: RunConfig):
    name = config.generation.policy
    if name in STUB_POLICIES:
        return STUB_POLICIES[name]()
    if name == "llm":
        endpoint = config.endpoint
        if endpoint.base_url:
            chat_config = ChatConfig(
                base_url=endpoint.base_url,
                model=endpoint.model,
                api_key=endpoint.api_key,
                temperature=endpoint.temperature,
                top_p=endpoint.top_p,
                repetition_penalty=endpoint.repetition_penalty,
                max_tokens=endpoint.max_tokens,
                timeout_ms=endpoint.timeout_ms,
                max_retries=endpoint.max_retries,
            )
        else:
            chat_config = ChatConfig.from_env(model=endpoint.model)
        cache = ResponseCache(endpoint.cache_dir) if endpoint.cache_dir else None
        return LlmPolicy(chat_config, cache=cache)
    raise ConfigError(f"unknown policy {name!r} (expected one of "
                      f"{sorted(STUB_POLICIES)} or 'llm')")


@main.command()
@click.option("--config", "config_path", required=True, help="Run config JSON.")
@click.option("--seed", "seed_override", type=int, default=None, help="Override rng_seed.")
@click.option("--jobs", type=int, default=None, help="Override worker count.")
def generate(config_path: str, seed_override: int | None, jobs: int | None) -> None:
    """Run TDGG or IDGG per the config and write graph, logs, and manifest."""
    _require_file(config_path, "config file")
    try:
        run = load_run_config(config_path)
    except (ConfigError, json.JSONDecodeError) as exc:
        _fail(str(exc), code=2)
    if seed_override is not None:
        run = dataclasses.replace(run, rng_seed=seed_override)
    gen: GenConfig = run.gen_config()
    if jobs is not None:
        gen = dataclasses.replace(gen, jobs=jobs)

    _require_file(run.paths.edges, "edge file")
    _require_file(run.paths.nodes, "node file")
    out_dir = Path(run.paths.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(run, out_dir)

    try:
        graph = load_graph(run.paths.edges, run.paths.nodes, run.graph.bipartite)
        policy = _build_policy(run)
        started = time.monotonic()
        if gen.mode is GenMode.TDGG:
            split = slice_seed(graph, gen.seed_edges)
            result = run_tdgg(split.seed, graph, gen, policy)
        else:
            seed_graph = (
                slice_seed(graph, gen.seed_edges).seed
                if graph.num_edges > gen.seed_edges
                else graph
            )
            result = run_idgg(seed_graph, gen, policy)
        elapsed = time.monotonic() - started
    except (GraphError, MalformedRecordError, ConfigError, ValueError) as exc:
        _fail(str(exc))

    save_graph(result.graph, out_dir / "generated.edges.csv", out_dir / "generated.nodes.csv")
    with open(out_dir / "recall_logs.jsonl", "w", encoding="utf-8") as fh:
        for entry in result.recall_logs:
            fh.write(json.dumps(entry) + "\n")
    manifest = {
        "status": result.status,
        "error": result.error,
        "policy": result.policy_name,
        "rounds_completed": result.rounds_completed,
        "round_seconds": result.round_seconds,
        "policy_retries": result.policy_retries,
        "timestamp_clamps": result.timestamp_clamps,
        "r_src": result.r_src,
        "r_dst": result.r_dst,
        "num_edges": result.graph.num_edges,
        "num_nodes": result.graph.num_nodes,
        "elapsed_seconds": elapsed,
        "config": run.resolved(),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    click.echo(
        f"{result.status}: {result.rounds_completed} round(s), "
        f"|E|={result.graph.num_edges}, |N|={result.graph.num_nodes} -> {out_dir}"
    )
    if result.status != "ok":
        _fail(result.error or "generation failed")


@main.command()
@click.option("--generated-edges", required=True)
@click.option("--generated-nodes", required=True)
@click.option("--truth-edges", required=True)
@click.option("--truth-nodes", required=True)
@click.option("--config", "config_path", default=None, help="Run config JSON for defaults.")
@click.option(
    "--suites",
    default="structural,embedding,discriminative",
    show_default=True,
    help=f"Comma-separated subset of {SUITES}.",
)
@click.option("--recall-logs", default=None, help="recall_logs.jsonl from generation.")
@click.option("--skip", default=None, type=int, help="Seed edges to skip in alignment.")
@click.option("--out", "out_path", default="report.json", show_default=True)
def evaluate(
    generated_edges: str,
    generated_nodes: str,
    truth_edges: str,
    truth_nodes: str,
    config_path: str | None,
    suites: str,
    recall_logs: str | None,
    skip: int | None,
    out_path: str,
) -> None:
    """Score a generated graph against ground truth; one consolidated report."""
    requested = [s.strip() for s in suites.split(",") if s.strip()]
    unknown = [s for s in requested if s not in SUITES]
    if unknown:
        _fail(f"unknown suite(s): {', '.join(unknown)}", code=2)
    for path, what in (
        (generated_edges, "generated edge file"),
        (generated_nodes, "generated node file"),
        (truth_edges, "truth edge file"),
        (truth_nodes, "truth node file"),
    ):
        _require_file(path, what)

    run = RunConfig()
    if config_path is not None:
        _require_file(config_path, "config file")
        try:
            run = load_run_config(config_path)
        except (ConfigError, json.JSONDecodeError) as exc:
            _fail(str(exc), code=2)
    if skip is None:
        skip = run.generation.seed_edges

    try:
        generated = load_graph(generated_edges, generated_nodes, run.graph.bipartite)
        truth = load_graph(truth_edges, truth_nodes, run.graph.bipartite)
    except (GraphError, MalformedRecordError) as exc:
        _fail(str(exc))

    logs: list[dict[str, object]] = []
    if recall_logs is not None:
        _require_file(recall_logs, "recall log file")
        with open(recall_logs, "r", encoding="utf-8") as fh:
            logs = [json.loads(line) for line in fh if line.strip()]

    report: dict[str, object] = {
        "generated": {"edges": generated.num_edges, "nodes": generated.num_nodes},
        "truth": {"edges": truth.num_edges, "nodes": truth.num_nodes},
        "skip": skip,
        "suites": {},
    }
    suites_out: dict[str, object] = report["suites"]  # type: ignore[assignment]
    failures = 0

    for suite in requested:
        try:
            if suite == "structural":
                suites_out[suite] = structural_report(generated, truth, run.mmd_config())
            elif suite == "embedding":
                if run.embedding.precomputed_path:
                    encoder = load_precomputed_embeddings(run.embedding.precomputed_path)
                else:
                    encoder = HashingEncoder(run.embedding.encoder_dim)
                suites_out[suite] = embedding_report(
                    generated,
                    truth,
                    encoder=encoder,
                    k_rows=run.embedding.k_rows,
                    d_cols=run.embedding.d_cols,
                    seed=run.rng_seed,
                )
            elif suite == "discriminative":
                suites_out[suite] = discriminative_report(
                    generated, truth, logs, skip=skip
                )
            elif suite == "textual":
                if run.endpoint.base_url:
                    evaluator = ChatConfig(
                        base_url=run.endpoint.base_url,
                        model=run.endpoint.model,
                        api_key=run.endpoint.api_key,
                        timeout_ms=run.endpoint.timeout_ms,
                        max_retries=run.endpoint.max_retries,
                    )
                else:
                    evaluator = ChatConfig.from_env(model=run.endpoint.model)
                cache = (
                    ResponseCache(run.endpoint.cache_dir) if run.endpoint.cache_dir else None
                )
                suites_out[suite] = textual_report(
                    generated,
                    evaluator,
                    skip=skip,
                    limit=run.textual.sample_limit,
                    rng_seed=run.rng_seed,
                    cache=cache,
                    score_node_profiles=run.textual.score_node_profiles,
                )
        except Exception as exc:  # suite-level isolation is the contract
            logger.warning("suite %s failed: %s", suite, exc)
            suites_out[suite] = {"error": str(exc)}
            failures += 1

    Path(out_path).write_text(json.dumps(report, indent=2), encoding="utf-8")
    click.echo(json.dumps(report, indent=2))
    if failures == len(requested):
        _fail("all requested suites failed")


def _markdown_report(report: dict[str, object]) -> str:
    lines: list[str] = ["| Metric | Value |", "| --- | --- |"]
    suites = report.get("suites", {})
    assert isinstance(suites, dict)

    def _fmt(value: object) -> str:
        if isinstance(value, bool):
            return "yes" if value else "no"
        if isinstance(value, float):
            return f"{value:.4f}"
        return str(value)

    structural = suites.get("structural")
    if isinstance(structural, dict) and "error" not in structural:
        lines.append(f"| Degree MMD | {_fmt(structural.get('degree_mmd'))} |")
        lines.append(f"| Spectra MMD | {_fmt(structural.get('spectra_mmd'))} |")
        lines.append(f"| D_k | {_fmt(structural.get('d_k'))} |")
        lines.append(f"| alpha | {_fmt(structural.get('alpha'))} |")
        lines.append(f"| Power-law valid | {_fmt(structural.get('power_law_valid'))} |")
    embedding = suites.get("embedding")
    if isinstance(embedding, dict) and "error" not in embedding:
        lines.append(
            f"| Graph embedding score | {_fmt(embedding.get('graph_embedding_score'))} |"
        )
    textual = suites.get("textual")
    if isinstance(textual, dict) and "error" not in textual:
        lines.append(f"| Textual average | {_fmt(textual.get('average'))} |")
    discriminative = suites.get("discriminative")
    if isinstance(discriminative, dict) and "error" not in discriminative:
        lines.append(f"| Hit@1 | {_fmt(discriminative.get('hit1'))} |")
        lines.append(f"| Hit@10 | {_fmt(discriminative.get('hit10'))} |")
        lines.append(
            f"| Weighted F1 | {_fmt(discriminative.get('weighted_f1'))} |"
        )
    return "\n".join(lines)


@main.command()
@click.argument("report_path")
@click.option("--markdown", is_flag=True, help="Render a markdown table.")
def report(report_path: str, markdown: bool) -> None:
    """Pretty-print a metric report produced by evaluate."""
    _require_file(report_path, "report file")
    data = json.loads(Path(report_path).read_text(encoding="utf-8"))
    if markdown:
        click.echo(_markdown_report(data))
    else:
        click.echo(json.dumps(data, indent=2))


if __name__ == "__main__":
    main()
