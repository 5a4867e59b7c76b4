"""Reading, writing, and streaming of graph files.

Two on-disk layouts are supported, both UTF-8:

* CSV with headers ``src,dst,ts,label,text`` (edges) and
  ``node_id,role,text`` (nodes).  Text fields follow RFC-4180 quoting and
  may embed delimiters and newlines.
* Line-delimited JSON with the same field names.

``parse_edge_stream`` builds a fully validated in-memory graph; the
bounded-memory path for multi-million-edge files lives in
:mod:`dytagen.ingest`.
"""

from __future__ import annotations

import csv
import io as _io
import json
import logging
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping

from .graph import DyTag, NodeRecord, Origin, Role, TemporalEdge, Timestamp

logger = logging.getLogger(__name__)

EDGE_FIELDS = ("src", "dst", "ts", "label", "text")
NODE_FIELDS = ("node_id", "role", "text")


class MalformedRecordError(ValueError):
    """A row that cannot be interpreted; carries the 1-based data row index."""

    def __init__(self, row_index: int, message: str) -> None:
        super().__init__(f"row {row_index}: {message}")
        self.row_index = row_index


def parse_timestamp(raw: object, row_index: int) -> Timestamp:
    """Integral columns stay integers; anything else becomes a float."""
    if isinstance(raw, bool):
        raise MalformedRecordError(row_index, f"timestamp {raw!r} is not a number")
    if isinstance(raw, (int, float)):
        return raw
    text = str(raw).strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise MalformedRecordError(row_index, f"timestamp {text!r} does not parse as a number") from None


def _warn_extra_columns(extra: set[str], what: str) -> None:
    if extra:
        logger.warning("ignoring unknown %s columns: %s", what, ", ".join(sorted(extra)))


def parse_edge_stream(
    edge_source: Iterable[Mapping[str, object]],
    node_source: Iterable[Mapping[str, object]],
    bipartite: bool,
) -> DyTag:
    """Build a validated graph from edge and node record streams.

    Record keys follow the file schemas; unknown keys are ignored with a
    warning.  Raises :class:`MalformedRecordError` (with the offending row
    index), or the graph-level errors for dangling endpoints, duplicate
    node ids, and bipartite violations.
    """
    nodes: list[NodeRecord] = []
    warned_node_extras = False
    for i, rec in enumerate(node_source, start=1):
        missing = [k for k in NODE_FIELDS if k not in rec]
        if missing:
            raise MalformedRecordError(i, f"node record missing fields {missing}")
        if not warned_node_extras:
            _warn_extra_columns(set(rec) - set(NODE_FIELDS) - {"origin"}, "node")
            warned_node_extras = True
        try:
            role = Role(str(rec["role"]))
        except ValueError:
            raise MalformedRecordError(i, f"unknown role {rec['role']!r}") from None
        origin = Origin(str(rec.get("origin", "dataset")))
        nodes.append(
            NodeRecord(
                node_id=str(rec["node_id"]),
                role=role,
                text=str(rec["text"]) if rec["text"] is not None else "",
                origin=origin,
            )
        )

    edges: list[TemporalEdge] = []
    warned_edge_extras = False
    for i, rec in enumerate(edge_source, start=1):
        missing = [k for k in EDGE_FIELDS if k not in rec]
        if missing:
            raise MalformedRecordError(i, f"edge record missing fields {missing}")
        if not warned_edge_extras:
            _warn_extra_columns(set(rec) - set(EDGE_FIELDS), "edge")
            warned_edge_extras = True
        edges.append(
            TemporalEdge(
                src=str(rec["src"]),
                dst=str(rec["dst"]),
                timestamp=parse_timestamp(rec["ts"], i),
                label=str(rec["label"]) if rec["label"] is not None else "",
                text=str(rec["text"]) if rec["text"] is not None else "",
            )
        )

    return DyTag(nodes, edges, bipartite)


# ---------------------------------------------------------------------------
# Record streams over files
# ---------------------------------------------------------------------------


def iter_csv_records(path: str | Path, fields: tuple[str, ...]) -> Iterator[dict[str, object]]:
    """Dict records from a headered CSV file, checking the header once."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRecordError(0, "empty file, expected a header row") from None
        missing = [f for f in fields if f not in header]
        if missing:
            raise MalformedRecordError(0, f"header {header} missing fields {missing}")
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRecordError(
                    i, f"expected {len(header)} fields, found {len(row)}"
                )
            yield dict(zip(header, row))


def iter_jsonl_records(path: str | Path) -> Iterator[dict[str, object]]:
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(i, f"invalid JSON: {exc}") from None
            if not isinstance(rec, dict):
                raise MalformedRecordError(i, "JSON record is not an object")
            yield rec


def load_graph(edge_path: str | Path, node_path: str | Path, bipartite: bool) -> DyTag:
    """Load a graph from CSV or JSONL files (detected by extension)."""
    edge_path, node_path = Path(edge_path), Path(node_path)
    if edge_path.suffix == ".jsonl":
        edge_records: Iterable[dict[str, object]] = iter_jsonl_records(edge_path)
    else:
        edge_records = iter_csv_records(edge_path, EDGE_FIELDS)
    if node_path.suffix == ".jsonl":
        node_records: Iterable[dict[str, object]] = iter_jsonl_records(node_path)
    else:
        node_records = iter_csv_records(node_path, NODE_FIELDS)
    return parse_edge_stream(edge_records, node_records, bipartite)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _format_ts(ts: Timestamp) -> str:
    return repr(ts) if isinstance(ts, float) else str(ts)


def write_edges_csv(graph: DyTag, sink: IO[str]) -> None:
    writer = csv.writer(sink)
    writer.writerow(EDGE_FIELDS)
    for e in graph.edges:
        writer.writerow([e.src, e.dst, _format_ts(e.timestamp), e.label, e.text])


def write_nodes_csv(graph: DyTag, sink: IO[str]) -> None:
    writer = csv.writer(sink)
    writer.writerow(NODE_FIELDS + ("origin",))
    for rec in graph.nodes.values():
        writer.writerow([rec.node_id, rec.role.value, rec.text, rec.origin.value])


def save_graph(graph: DyTag, edge_path: str | Path, node_path: str | Path) -> None:
    with open(edge_path, "w", encoding="utf-8", newline="") as fh:
        write_edges_csv(graph, fh)
    with open(node_path, "w", encoding="utf-8", newline="") as fh:
        write_nodes_csv(graph, fh)


def serialize_graph(graph: DyTag) -> bytes:
    """Canonical byte form of the whole graph, used for determinism checks."""
    edge_buf, node_buf = _io.StringIO(), _io.StringIO()
    write_edges_csv(graph, edge_buf)
    write_nodes_csv(graph, node_buf)
    return (node_buf.getvalue() + edge_buf.getvalue()).encode("utf-8")


