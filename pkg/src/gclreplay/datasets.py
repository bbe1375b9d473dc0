"""Dataset directory IO.

A dataset directory holds:

* ``manifest.json`` — {"name", "num_nodes", "num_features", "num_classes"}
* ``edges.csv``     — two integer columns, one undirected edge per row, no header
* ``features.csv``  — num_nodes rows of num_features reals, no header
* ``labels.csv``    — one integer class id per row

Loaders validate every count against the manifest. Directed inputs are fine:
edges are symmetrized (duplicates and reversed duplicates collapse into one
undirected edge) and self-loop rows are dropped with a warning, since message
passing adds its own self-loops.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DatasetFormatError
from .graphs import Graph

logger = logging.getLogger(__name__)

MANIFEST_KEYS = ("name", "num_nodes", "num_features", "num_classes")


def _read_manifest(root: Path) -> dict:
    mf = root / "manifest.json"
    if not mf.is_file():
        raise DatasetFormatError(f"missing manifest.json in {root}")
    try:
        manifest = json.loads(mf.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"manifest.json is not valid JSON: {exc}") from None
    for key in MANIFEST_KEYS:
        if key not in manifest:
            raise DatasetFormatError(f"manifest.json missing key {key!r}")
    return manifest


def load_dataset(path) -> tuple[Graph, dict]:
    """Read and validate a dataset directory; returns (graph, manifest)."""
    root = Path(path)
    if not root.is_dir():
        raise DatasetFormatError(f"dataset directory not found: {root}")
    manifest = _read_manifest(root)
    n = int(manifest["num_nodes"])
    d = int(manifest["num_features"])
    c = int(manifest["num_classes"])

    feat_file = root / "features.csv"
    if not feat_file.is_file():
        raise DatasetFormatError("missing features.csv")
    features = pd.read_csv(feat_file, header=None, dtype=np.float64).to_numpy()
    if features.shape != (n, d):
        raise DatasetFormatError(
            f"features.csv is {features.shape[0]}x{features.shape[1]}, "
            f"manifest says {n}x{d}"
        )

    label_file = root / "labels.csv"
    if not label_file.is_file():
        raise DatasetFormatError("missing labels.csv")
    labels = pd.read_csv(label_file, header=None, dtype=np.int64).to_numpy().ravel()
    if labels.shape[0] != n:
        raise DatasetFormatError(
            f"labels.csv has {labels.shape[0]} rows, manifest says {n}"
        )
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= c:
        raise DatasetFormatError(
            f"labels must lie in [0,{c}), found range "
            f"[{labels.min()},{labels.max()}]"
        )
    distinct = np.unique(labels).size
    if distinct != c:
        raise DatasetFormatError(
            f"manifest declares {c} classes but labels cover {distinct}"
        )

    edge_file = root / "edges.csv"
    if not edge_file.is_file():
        raise DatasetFormatError("missing edges.csv")
    if edge_file.stat().st_size == 0:
        logger.warning("edges.csv is empty: loading an edgeless graph")
        raw = np.empty((0, 2), dtype=np.int64)
    else:
        frame = pd.read_csv(edge_file, header=None)
        if frame.shape[1] != 2:
            raise DatasetFormatError(
                f"edges.csv must have exactly two columns, found {frame.shape[1]}"
            )
        try:
            raw = frame.to_numpy(dtype=np.int64)
        except (ValueError, TypeError):
            raise DatasetFormatError("edges.csv contains non-integer values") from None
    if raw.size and (raw.min() < 0 or raw.max() >= n):
        raise DatasetFormatError(
            f"edge endpoint outside [0,{n}): found {raw.min()}..{raw.max()}"
        )
    loops = raw[:, 0] == raw[:, 1] if raw.size else np.empty(0, dtype=bool)
    if raw.size and loops.any():
        logger.warning("dropping %d self-loop rows from edges.csv", int(loops.sum()))
        raw = raw[~loops]
    edges = {(int(min(u, v)), int(max(u, v))) for u, v in raw}

    graph = Graph(features, labels, edges)
    return graph, manifest


def save_dataset(path, graph: Graph, name: str) -> None:
    """Write a graph as a dataset directory in the documented format."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "name": name,
        "num_nodes": graph.num_nodes,
        "num_features": graph.feature_dim,
        "num_classes": int(np.unique(graph.labels).size),
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    with open(root / "edges.csv", "w") as fh:
        for u, v in graph.edge_array:
            fh.write(f"{u},{v}\n")
    with open(root / "labels.csv", "w") as fh:
        for y in graph.labels:
            fh.write(f"{y}\n")
    # features are written sparsely-aware: integers print compactly
    pd.DataFrame(graph.features).to_csv(root / "features.csv", header=False,
                                        index=False, float_format="%.10g")


def validate_dataset(path) -> dict:
    """Load-with-validation; returns the counts the CLI prints."""
    graph, manifest = load_dataset(path)
    return {
        "name": manifest["name"],
        "num_nodes": graph.num_nodes,
        "num_edges": graph.num_edges,
        "num_features": graph.feature_dim,
        "num_classes": int(manifest["num_classes"]),
    }
