"""On-disk dataset format: UTF-8, line-delimited JSON records.

Line 1 is a header object (generator, seed, f_v, f_e, coord_dim, count);
each following line is one graph. All floats are printed with 17
significant digits, which makes serialize -> parse -> serialize
byte-identical.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import FormatError, ParseError
from .graph import Graph, GraphDataset


def _fmt_number(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return "%.17g" % float(x)


def _fmt_float_list(values):
    return "[" + ",".join("%.17g" % v for v in values) + "]"


def _fmt_labels(labels):
    parts = []
    for key in sorted(labels):
        value = labels[key]
        if isinstance(value, str):
            rendered = json.dumps(value)
        else:
            rendered = _fmt_number(value)
        parts.append(f"{json.dumps(key)}:{rendered}")
    return "{" + ",".join(parts) + "}"


def _graph_line(g):
    edges = "[" + ",".join(f"[{i},{j}]" for i, j in g.edges) + "]"
    return (
        "{"
        f'"n":{g.coords.shape[0]},'
        f'"coords":{_fmt_float_list(g.coords.reshape(-1))},'
        f'"node_features":{_fmt_float_list(g.node_features.reshape(-1))},'
        f'"edges":{edges},'
        f'"edge_features":{_fmt_float_list(g.edge_features.reshape(-1))},'
        f'"labels":{_fmt_labels(g.labels)}'
        "}"
    )


def save_dataset(dataset, path):
    """Write a dataset to ``path`` in the line-delimited format."""
    dataset.validate()
    f_v, f_e, coord_dim = dataset.feature_dims
    header = (
        "{"
        f'"generator":{json.dumps(dataset.generator)},'
        f'"seed":{int(dataset.seed)},'
        f'"f_v":{f_v},"f_e":{f_e},"coord_dim":{coord_dim},'
        f'"count":{len(dataset)}'
        "}"
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for g in dataset:
            fh.write(_graph_line(g) + "\n")


def _parse_line(text, lineno):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), line=lineno) from exc


def load_dataset(path):
    """Read a dataset written by :func:`save_dataset`."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", line=1)
    header = _parse_line(lines[0], 1)
    for key in ("generator", "seed", "f_v", "f_e", "coord_dim", "count"):
        if key not in header:
            raise ParseError(f"header missing field '{key}'", line=1)
    count = header["count"]
    body = [line for line in lines[1:] if line]
    if len(body) != count:
        raise FormatError(
            f"header announces {count} graphs but file holds {len(body)}"
        )
    f_v, f_e, d = header["f_v"], header["f_e"], header["coord_dim"]
    graphs = []
    for offset, line in enumerate(body):
        lineno = offset + 2
        rec = _parse_line(line, lineno)
        try:
            n = rec["n"]
            coords = np.asarray(rec["coords"], dtype=np.float64).reshape(n, d)
            node_features = np.asarray(
                rec["node_features"], dtype=np.float64
            ).reshape(n, f_v)
            edges = np.asarray(rec["edges"], dtype=np.intp).reshape(-1, 2)
            edge_features = np.asarray(
                rec["edge_features"], dtype=np.float64
            ).reshape(edges.shape[0], f_e)
            labels = rec["labels"]
        except (KeyError, ValueError) as exc:
            raise ParseError(f"malformed graph record: {exc}", line=lineno) from exc
        adjacency = np.zeros((n, n))
        if edges.size:
            adjacency[edges[:, 0], edges[:, 1]] = 1.0
        graphs.append(
            Graph(
                coords=coords,
                node_features=node_features,
                edges=edges,
                edge_features=edge_features,
                adjacency=adjacency,
                labels=labels,
            )
        )
    dataset = GraphDataset(
        graphs=graphs, generator=header["generator"], seed=header["seed"]
    )
    dataset.validate()
    return dataset
