"""Dense weighted graphs, row normalization, binarization and the two
small-world measures (clustering coefficient, average path length)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path


class GraphError(ValueError):
    pass


class NonFiniteInput(GraphError):
    pass


class EmptyList(GraphError):
    pass


@dataclass
class DenseGraph:
    """Weighted directed graph over a fixed node set.

    ``weights[i, j]`` is the weight of the edge from node ``i`` to node
    ``j``.  ``node_kind`` records whether nodes are spatial tokens,
    feature channels or biological units; ``row_normalized`` is set when
    every row sums to 1.
    """

    weights: np.ndarray
    node_kind: str = "token"
    row_normalized: bool = False

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[0] != self.weights.shape[1]:
            raise GraphError("weights must be a square matrix")
        if not np.all(np.isfinite(self.weights)):
            raise NonFiniteInput("graph weights must be finite")
        if np.any(self.weights < 0):
            raise GraphError("graph weights must be non-negative")
        if self.row_normalized:
            sums = self.weights.sum(axis=1)
            if not np.allclose(sums, 1.0, atol=1e-6):
                raise GraphError("row_normalized graph has rows not summing to 1")

    @property
    def n(self) -> int:
        return self.weights.shape[0]


@dataclass
class BinaryGraph:
    """Symmetric unweighted graph with empty diagonal."""

    adjacency: np.ndarray

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=bool)
        a = self.adjacency
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError("adjacency must be square")
        if not np.array_equal(a, a.T):
            raise GraphError("adjacency must be symmetric")
        if np.any(np.diag(a)):
            raise GraphError("adjacency must have an empty diagonal")

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)


@dataclass(frozen=True)
class GraphMeasures:
    """Clustering coefficient and average path length of one graph.

    ``path_length`` is NaN when no pair of nodes is connected;
    ``connected_pair_fraction`` reports how many ordered pairs the mean
    was taken over.
    """

    clustering: float
    path_length: float
    connected_pair_fraction: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.clustering, self.path_length)


def row_normalize_scaled(raw: np.ndarray, scale_dim: int) -> DenseGraph:
    """Row-wise softmax of ``raw / sqrt(scale_dim)``.

    Equivalent to A D^-1 with A = exp(raw/sqrt(scale_dim)) and D the
    diagonal of row sums.  Each row's maximum is subtracted before
    exponentiation so large logits cannot overflow.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise NonFiniteInput("softmax input must be finite")
    if scale_dim < 1:
        raise GraphError("scale_dim must be >= 1")
    logits = raw / np.sqrt(float(scale_dim))
    logits = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(logits)
    out = expd / expd.sum(axis=1, keepdims=True)
    return DenseGraph(out, row_normalized=True)


def threshold_binarize(g: DenseGraph, tau: float, rule: str = "max_symmetrize") -> BinaryGraph:
    """Symmetrize then keep edges strictly above ``tau``.

    ``max_symmetrize`` keeps an undirected edge when either direction
    exceeds the threshold; ``mean_symmetrize`` averages both directions
    first.  The diagonal is always dropped.
    """
    if tau <= 0:
        raise GraphError("tau must be positive")
    w = g.weights
    if rule == "max_symmetrize":
        sym = np.maximum(w, w.T)
    elif rule == "mean_symmetrize":
        sym = 0.5 * (w + w.T)
    else:
        raise GraphError(f"unknown symmetrization rule: {rule!r}")
    adj = sym > tau
    np.fill_diagonal(adj, False)
    return BinaryGraph(adj)


def clustering_coefficient(g: BinaryGraph) -> float:
    """Mean local clustering, Watts-Strogatz convention.

    Nodes of degree < 2 contribute 0 rather than being excluded.
    """
    a = g.adjacency.astype(np.float64)
    k = a.sum(axis=1)
    # triangles through i = (A^3)_ii / 2
    tri = np.einsum("ij,jk,ki->i", a, a, a) / 2.0
    denom = k * (k - 1.0)
    local = np.divide(2.0 * tri, denom, out=np.zeros_like(tri), where=denom > 0)
    return float(local.mean())


def average_path_length(g: BinaryGraph) -> tuple[float, float]:
    """Mean shortest-path distance over connected ordered pairs.

    Returns ``(length, connected_pair_fraction)``; length is NaN when
    the graph has no connected pair at all.
    """
    n = g.n
    if n < 2:
        raise GraphError("average_path_length needs at least 2 nodes")
    dist = shortest_path(csr_matrix(g.adjacency), method="D", unweighted=True, directed=False)
    off = ~np.eye(n, dtype=bool)
    finite = np.isfinite(dist) & off
    n_pairs = n * (n - 1)
    frac = finite.sum() / n_pairs
    if frac == 0:
        return (float("nan"), 0.0)
    return (float(dist[finite].mean()), float(frac))


def graph_measures(g: DenseGraph, tau: float | str = "auto",
                   rule: str = "max_symmetrize") -> GraphMeasures:
    """Binarize ``g`` and compute both measures.

    ``tau="auto"`` uses 1/n, the uninformative level of a row-stochastic
    matrix; a uniform graph binarizes to the empty graph under the
    strict inequality.
    """
    if tau == "auto":
        tau = 1.0 / g.n
    b = threshold_binarize(g, float(tau), rule=rule)
    c = clustering_coefficient(b)
    l, frac = average_path_length(b)
    return GraphMeasures(clustering=c, path_length=l, connected_pair_fraction=frac)


def diagonal_concat(graphs: Sequence[DenseGraph]) -> DenseGraph:
    """Block-diagonal concatenation; off-diagonal blocks are zero."""
    if not graphs:
        raise EmptyList("diagonal_concat needs at least one graph")
    sizes = [g.n for g in graphs]
    total = sum(sizes)
    out = np.zeros((total, total))
    at = 0
    for g in graphs:
        out[at:at + g.n, at:at + g.n] = g.weights
        at += g.n
    return DenseGraph(out, node_kind=graphs[0].node_kind)
