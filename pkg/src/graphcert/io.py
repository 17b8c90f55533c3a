"""JSON/CSV file formats for graphs, datasets, params, certificates and reports."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .certify import Certificate
from .gnn import GcnParams
from .graph import Graph, Perturbation, canonicalize_edge, validate


class DataError(ValueError):
    """Malformed or invalid input file."""


def graph_to_dict(g: Graph) -> dict:
    labels = g.labels or (None,) * len(g.nodes)
    return {
        "directed": g.directed,
        "nodes": [
            {"id": u, "x": [float(t) for t in g.x[i]], "y": labels[i]}
            for i, u in enumerate(g.nodes)
        ],
        "edges": [list(e) for e in g.sorted_edges()],
        "graph_label": g.graph_label,
    }


def graph_from_dict(obj: Any, where: str = "graph") -> Graph:
    if not isinstance(obj, dict):
        raise DataError(f"{where}: expected an object")
    for key in ("nodes", "edges"):
        if key not in obj:
            raise DataError(f"{where}: missing field {key!r}")
    directed = bool(obj.get("directed", False))
    feats, labels = {}, {}
    for k, node in enumerate(obj["nodes"]):
        try:
            u = int(node["id"])
            feats[u] = [float(t) for t in node["x"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{where}: nodes[{k}] is malformed ({exc})") from None
        if u in labels:
            raise DataError(f"{where}: duplicate node id {u}")
        labels[u] = node.get("y")
    edges = []
    for k, e in enumerate(obj["edges"]):
        if not (isinstance(e, (list, tuple)) and len(e) == 2):
            raise DataError(f"{where}: edges[{k}] must be a pair")
        a, b = int(e[0]), int(e[1])
        if a not in feats or b not in feats:
            raise DataError(f"{where}: edges[{k}] = [{a},{b}] has an endpoint not in the node set")
        edges.append(canonicalize_edge(a, b, directed))
    has_labels = any(y is not None for y in labels.values())
    dims = {len(f) for f in feats.values()}
    g = Graph.build(
        feats, edges, directed=directed,
        labels=labels if has_labels else None,
        graph_label=obj.get("graph_label"),
        dim=next(iter(dims)) if len(dims) == 1 else None,
    )
    problems = validate(g)
    if problems:
        raise DataError(f"{where}: " + "; ".join(problems))
    return g


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"


def save_graph(g: Graph, path) -> None:
    Path(path).write_text(dumps(graph_to_dict(g)))


def _read_json(path) -> Any:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_graph(path) -> Graph:
    return graph_from_dict(_read_json(path), str(path))


def save_dataset(graphs: Sequence[Graph], split: dict[str, list[int]], path, task: str) -> None:
    Path(path).write_text(dumps({
        "task": task,
        "graphs": [graph_to_dict(g) for g in graphs],
        "split": split,
    }))


def load_dataset(path) -> tuple[list[Graph], dict[str, list[int]], str]:
    """Dataset file, or a bare graph file treated as a one-graph node dataset."""
    obj = _read_json(path)
    if "graphs" not in obj:
        g = graph_from_dict(obj, str(path))
        labeled = [u for u in g.nodes if g.label(u) is not None]
        return [g], {"train": labeled, "val": [], "test": labeled}, "node"
    graphs = [graph_from_dict(o, f"{path}: graphs[{k}]") for k, o in enumerate(obj["graphs"])]
    return graphs, obj.get("split", {}), obj.get("task", "node" if len(graphs) == 1 else "graph")


def params_to_dict(params: GcnParams) -> dict:
    return {
        "dims": list(params.dims),
        "layers": [[float(t) for t in w.ravel()] for w in params.layers],
    }


def params_from_dict(obj: Any, where: str = "params") -> GcnParams:
    try:
        dims = [int(d) for d in obj["dims"]]
        flat = obj["layers"]
    except (KeyError, TypeError) as exc:
        raise DataError(f"{where}: missing or malformed field ({exc})") from None
    if len(flat) != len(dims) - 1:
        raise DataError(f"{where}: {len(dims)} dims need {len(dims) - 1} layers, got {len(flat)}")
    layers = []
    for k, vals in enumerate(flat):
        shape = (dims[k + 1], dims[k])
        if len(vals) != shape[0] * shape[1]:
            raise DataError(f"{where}: layers[{k}] has {len(vals)} values, expected {shape[0] * shape[1]}")
        layers.append(np.asarray(vals, dtype=float).reshape(shape))
    try:
        return GcnParams.from_arrays(layers)
    except ValueError as exc:
        raise DataError(f"{where}: {exc}") from None


def save_params(params: GcnParams, path) -> None:
    Path(path).write_text(dumps(params_to_dict(params)))


def load_params(path) -> GcnParams:
    return params_from_dict(_read_json(path), str(path))


def perturbation_to_dict(p: Perturbation) -> dict:
    return {
        "edges_added": [list(e) for e in sorted(p.edges_added)],
        "edges_deleted": [list(e) for e in sorted(p.edges_deleted)],
        "nodes_added": [
            {"id": w, "x": list(f), "edges": [list(e) for e in sorted(es)]}
            for w, (f, es) in sorted(p.nodes_added.items())
        ],
        "nodes_deleted": sorted(p.nodes_deleted),
        "features_rewritten": [{"id": u, "x": list(f)} for u, f in sorted(p.features_rewritten.items())],
    }


def certificate_record(cert: Certificate, label: int | None = None, target: int | None = None) -> dict:
    rec = cert.to_json()
    if target is not None:
        rec["node"] = target
    if label is not None:
        rec["label"] = label
    return rec


def curve_csv(rows: Iterable[tuple[int, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["m", "certified_accuracy"])
    for m, acc in rows:
        w.writerow([m, repr(float(acc))])
    return buf.getvalue()


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theorem", "max_altered", "bound", "slack"])
    for r in rows:
        w.writerow([r.theorem, r.max_altered, r.bound, "" if r.slack is None else r.slack])
    return buf.getvalue()
