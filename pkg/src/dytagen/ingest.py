"""Bounded-memory ingestion of arbitrarily large edge files.

Validation, canonicalization, and timestamp ordering all run in streaming
fashion: rows are buffered ``chunk_rows`` at a time, sorted runs go to a
spill directory, and a heap merge writes the canonical output.  Peak
memory is governed by the chunk size plus the node-id registry, never by
the total volume of text.
"""

from __future__ import annotations

import csv
import heapq
import json
import logging
import tempfile
from pathlib import Path
from typing import IO, Iterator

from .graph import Role, Timestamp
from .io import EDGE_FIELDS, NODE_FIELDS, MalformedRecordError, parse_timestamp

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_ROWS = 50_000


def _open_reader(path: Path) -> tuple[IO[str], csv.reader]:  # type: ignore[valid-type]
    fh = open(path, "r", encoding="utf-8", newline="")
    return fh, csv.reader(fh)


def _header_map(header: list[str], fields: tuple[str, ...], path: Path) -> list[int]:
    missing = [f for f in fields if f not in header]
    if missing:
        raise MalformedRecordError(0, f"{path} header {header} missing fields {missing}")
    extra = set(header) - set(fields) - {"origin"}
    if extra:
        logger.warning("%s: ignoring unknown columns: %s", path, ", ".join(sorted(extra)))
    return [header.index(f) for f in fields]


def _stream_nodes(
    node_path: Path, out_path: Path, bipartite: bool
) -> dict[str, Role]:
    """Validate and canonicalize the node file; keep only id -> role."""
    roles: dict[str, Role] = {}
    fh, reader = _open_reader(node_path)
    with fh, open(out_path, "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out)
        writer.writerow(NODE_FIELDS + ("origin",))
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRecordError(0, f"{node_path}: empty file") from None
        cols = _header_map(header, NODE_FIELDS, node_path)
        origin_col = header.index("origin") if "origin" in header else None
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRecordError(i, f"expected {len(header)} fields, found {len(row)}")
            node_id, role_raw, text = (row[c] for c in cols)
            try:
                role = Role(role_raw)
            except ValueError:
                raise MalformedRecordError(i, f"unknown role {role_raw!r}") from None
            if bipartite and role is Role.BOTH:
                raise MalformedRecordError(
                    i, f"node {node_id!r} has role 'both' in a bipartite graph"
                )
            if node_id in roles:
                raise MalformedRecordError(i, f"duplicate node_id {node_id!r}")
            roles[node_id] = role
            origin = row[origin_col] if origin_col is not None else "dataset"
            writer.writerow([node_id, role.value, text, origin])
    return roles


def _validate_edge_row(
    row_index: int,
    src: str,
    dst: str,
    ts_raw: str,
    roles: dict[str, Role],
    bipartite: bool,
) -> Timestamp:
    for endpoint in (src, dst):
        if endpoint not in roles:
            raise MalformedRecordError(
                row_index, f"edge references undeclared node {endpoint!r}"
            )
    if bipartite:
        if roles[src] is not Role.SOURCE:
            raise MalformedRecordError(
                row_index, f"bipartite edge source {src!r} has role {roles[src].value!r}"
            )
        if roles[dst] is not Role.DESTINATION:
            raise MalformedRecordError(
                row_index, f"bipartite edge destination {dst!r} has role {roles[dst].value!r}"
            )
    return parse_timestamp(ts_raw, row_index)


def _spill_run(run_dir: Path, run_index: int, rows: list[tuple[Timestamp, int, list[str]]]) -> Path:
    rows.sort(key=lambda item: (item[0], item[1]))
    path = run_dir / f"run{run_index:05d}.csv"
    with open(path, "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out)
        for ts, seq, fields in rows:
            writer.writerow([repr(ts) if isinstance(ts, float) else str(ts), str(seq)] + fields)
    return path


def _iter_run(path: Path) -> Iterator[tuple[Timestamp, int, list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            ts = parse_timestamp(row[0], 0)
            yield ts, int(row[1]), row[2:]


def stream_ingest(
    edge_path: str | Path,
    node_path: str | Path,
    out_dir: str | Path,
    bipartite: bool,
    chunk_rows: int = DEFAULT_CHUNK_ROWS,
) -> dict[str, object]:
    """Validate and canonicalize a graph without loading it whole.

    Writes ``edges.csv`` (timestamp-sorted, canonical column order),
    ``nodes.csv``, and returns the stats summary that ``ingest`` also
    writes to ``stats.json``.
    """
    edge_path, node_path = Path(edge_path), Path(node_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    roles = _stream_nodes(node_path, out / "nodes.csv", bipartite)

    label_hist: dict[str, int] = {}
    ts_min: Timestamp | None = None
    ts_max: Timestamp | None = None
    n_edges = 0
    run_paths: list[Path] = []

    fh, reader = _open_reader(edge_path)
    with fh, tempfile.TemporaryDirectory(dir=out, prefix="sortruns.") as tmp:
        run_dir = Path(tmp)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRecordError(0, f"{edge_path}: empty file") from None
        cols = _header_map(header, EDGE_FIELDS, edge_path)

        buffer: list[tuple[Timestamp, int, list[str]]] = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRecordError(i, f"expected {len(header)} fields, found {len(row)}")
            src, dst, ts_raw, label, text = (row[c] for c in cols)
            ts = _validate_edge_row(i, src, dst, ts_raw, roles, bipartite)
            n_edges += 1
            label_hist[label] = label_hist.get(label, 0) + 1
            ts_min = ts if ts_min is None else min(ts_min, ts)
            ts_max = ts if ts_max is None else max(ts_max, ts)
            buffer.append((ts, i, [src, dst, ts_raw, label, text]))
            if len(buffer) >= chunk_rows:
                run_paths.append(_spill_run(run_dir, len(run_paths), buffer))
                buffer = []
        if buffer:
            run_paths.append(_spill_run(run_dir, len(run_paths), buffer))

        with open(out / "edges.csv", "w", encoding="utf-8", newline="") as sink:
            writer = csv.writer(sink)
            writer.writerow(EDGE_FIELDS)
            merged = heapq.merge(
                *(_iter_run(p) for p in run_paths), key=lambda item: (item[0], item[1])
            )
            for _ts, _seq, fields in merged:
                writer.writerow(fields)

    return {
        "num_nodes": len(roles),
        "num_edges": n_edges,
        "timestamp_min": ts_min,
        "timestamp_max": ts_max,
        "label_histogram": dict(sorted(label_hist.items())),
        "bipartite": bipartite,
    }
