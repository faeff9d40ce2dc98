"""Plain-text edge-list loader for biological network graphs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import BinaryGraph, GraphMeasures, clustering_coefficient, average_path_length


class ConnectomeError(ValueError):
    pass


class ParseError(ConnectomeError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyGraph(ConnectomeError):
    pass


@dataclass
class ConnectomeGraph:
    """Named biological network as a weighted edge list.

    Nodes are densely re-indexed 0..n-1 in first-appearance order;
    duplicate edges keep the maximum weight; self-loops are dropped on
    ingest (count kept in ``dropped_self_loops``).
    """

    name: str
    n: int
    edges: list[tuple[int, int, float]]
    dropped_self_loops: int = 0

    def to_binary(self) -> BinaryGraph:
        """Undirected presence/absence graph: any positive weight is an edge."""
        adj = np.zeros((self.n, self.n), dtype=bool)
        for src, dst, w in self.edges:
            if w > 0:
                adj[src, dst] = True
                adj[dst, src] = True
        np.fill_diagonal(adj, False)
        return BinaryGraph(adj)

    def measures(self) -> GraphMeasures:
        b = self.to_binary()
        c = clustering_coefficient(b)
        l, frac = average_path_length(b)
        return GraphMeasures(clustering=c, path_length=l, connected_pair_fraction=frac)


def read_connectome(path, name: str | None = None) -> ConnectomeGraph:
    """Parse "src dst [weight]" lines; "#" starts a comment; weight
    defaults to 1.0."""
    if name is None:
        import os
        name = os.path.splitext(os.path.basename(str(path)))[0]
    index: dict[str, int] = {}
    merged: dict[tuple[int, int], float] = {}
    dropped = 0
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) not in (2, 3):
                raise ParseError(line_no, f"expected 'src dst [weight]', got {text!r}")
            src_label, dst_label = parts[0], parts[1]
            try:
                weight = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise ParseError(line_no, f"bad weight {parts[2]!r}") from None
            if not (weight > 0) or not np.isfinite(weight):
                raise ParseError(line_no, f"weight must be positive, got {weight}")
            for label in (src_label, dst_label):
                if label not in index:
                    index[label] = len(index)
            src, dst = index[src_label], index[dst_label]
            if src == dst:
                dropped += 1
                continue
            key = (src, dst)
            merged[key] = max(merged.get(key, 0.0), weight)
    if not merged:
        raise EmptyGraph(f"{path}: no usable edges")
    edges = [(s, d, w) for (s, d), w in sorted(merged.items())]
    return ConnectomeGraph(name=name, n=len(index), edges=edges,
                           dropped_self_loops=dropped)


def write_connectome(graph: ConnectomeGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for src, dst, w in graph.edges:
            f.write(f"{src} {dst} {w:.9g}\n")
