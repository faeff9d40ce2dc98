"""Per-layer aggregation/affine graph construction for the five model
families, inter-layer resampling to the canonical 14x14(+1) grid, and
layer composition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .archive import ValidatedModel
from .graph import (DenseGraph, GraphMeasures, diagonal_concat, graph_measures,
                    row_normalize_scaled)

CANONICAL_SIDE = 14


class BuilderError(ValueError):
    pass


class ShapeMismatch(BuilderError):
    pass


class BadWindowAssignment(BuilderError):
    pass


class BadKernel(BuilderError):
    pass


class IndivisibleGrid(BuilderError):
    pass


class IncompatibleGrid(BuilderError):
    pass


class MixedSizes(BuilderError):
    pass


def _default_grid(n_spatial: int) -> tuple[int, int]:
    side = int(round(np.sqrt(n_spatial)))
    if side * side == n_spatial:
        return (side, side)
    return (n_spatial, 1)


@dataclass
class LayerAggregation:
    """One layer's token-mixing graph plus the grid it lives on."""

    graph: DenseGraph
    layer_index: int
    source_grid: tuple[int, int]
    has_class_token: bool = False

    def __post_init__(self):
        h, w = self.source_grid
        expected = h * w + (1 if self.has_class_token else 0)
        if self.graph.n != expected:
            raise ShapeMismatch(
                f"graph has {self.graph.n} nodes, grid {self.source_grid} "
                f"implies {expected}")


@dataclass
class CanonicalAggregation:
    """Aggregation graph resampled to the fixed 14x14(+1) node layout."""

    graph: DenseGraph
    class_token_policy: str  # kept | dropped | padded

    def __post_init__(self):
        if self.graph.n not in (196, 197):
            raise IncompatibleGrid(f"canonical graph must have 196 or 197 nodes, "
                                   f"got {self.graph.n}")


# ---------------------------------------------------------------------------
# per-family aggregation graphs


def vit_aggregation(pos_embed, wq, wk, scale_dim, *, layer_index=0,
                    grid=None, has_class_token=False, heads=1,
                    head_mode="whole") -> LayerAggregation:
    """Attention graph from position embeddings alone.

    Raw logits are P Wq Wk^T P^T.  ``whole`` mode softmaxes the full
    matrix scaled by sqrt(scale_dim); ``per-head`` slices Wq/Wk per
    head, scales each head's logits by its own head dimension, averages
    them, then applies a single softmax.  DeiT uses the identical
    construction.
    """
    p = np.asarray(pos_embed, dtype=np.float64)
    wq = np.asarray(wq, dtype=np.float64)
    wk = np.asarray(wk, dtype=np.float64)
    d = p.shape[1] if p.ndim == 2 else -1
    if p.ndim != 2 or wq.shape != (d, d) or wk.shape != (d, d):
        raise ShapeMismatch(
            f"inconsistent shapes: pos_embed {p.shape}, wq {wq.shape}, wk {wk.shape}")
    if head_mode == "whole":
        raw = p @ wq @ wk.T @ p.T
        g = row_normalize_scaled(raw, scale_dim)
    elif head_mode == "per-head":
        if heads < 1 or d % heads:
            raise ShapeMismatch(f"embed dim {d} not divisible into {heads} heads")
        dh = d // heads
        acc = np.zeros((p.shape[0], p.shape[0]))
        for h in range(heads):
            sl = slice(h * dh, (h + 1) * dh)
            acc += (p @ wq[:, sl] @ wk[:, sl].T @ p.T) / np.sqrt(dh)
        g = row_normalize_scaled(acc / heads, 1)
    else:
        raise BuilderError(f"unknown head_mode {head_mode!r}")
    if grid is None:
        grid = _default_grid(p.shape[0] - (1 if has_class_token else 0))
    return LayerAggregation(graph=g, layer_index=layer_index, source_grid=grid,
                            has_class_token=has_class_token)


def swin_window_assignment(grid, window, shift) -> np.ndarray:
    """Token indices per window slot for a (shifted) window partition.

    Returns an int array [n_windows, window*window]; entry [k, s] is the
    token occupying slot ``s`` of window ``k`` after the cyclic shift.
    """
    h, w = grid
    if h % window or w % window:
        raise BadWindowAssignment(f"grid {grid} not divisible by window {window}")
    out = np.empty((h // window * (w // window), window * window), dtype=np.int64)
    k = 0
    for wi in range(h // window):
        for wj in range(w // window):
            for a in range(window):
                for b in range(window):
                    r = (wi * window + a + shift) % h
                    c = (wj * window + b + shift) % w
                    out[k, a * window + b] = r * w + c
            k += 1
    return out


def swin_aggregation(bias, mask, window_assignment, scale_dim, *,
                     layer_index=0, grid=None) -> LayerAggregation:
    """Windowed attention graph: per-window softmax of I/sqrt(dim) + B + Mask.

    ``bias`` is either one [n_w, n_w] table shared by all windows or one
    per window; ``mask`` likewise.  Bias and mask enter as raw logits
    (no sqrt(dim) rescaling).  Entries between tokens of different
    windows are exactly zero.
    """
    windows = np.asarray(window_assignment, dtype=np.int64)
    if windows.ndim != 2:
        raise BadWindowAssignment("window assignment must be [n_windows, n_w]")
    n_windows, n_w = windows.shape
    n_tok = n_windows * n_w
    counts = np.bincount(windows.ravel(), minlength=n_tok)
    if len(counts) != n_tok or not np.all(counts == 1):
        raise BadWindowAssignment("every token must occupy exactly one window slot")
    try:
        bias = np.broadcast_to(np.asarray(bias, dtype=np.float64),
                               (n_windows, n_w, n_w))
        mask = np.broadcast_to(np.asarray(mask, dtype=np.float64),
                               (n_windows, n_w, n_w))
    except ValueError:
        raise ShapeMismatch("bias/mask blocks must be n_w x n_w") from None
    eye = np.eye(n_w) / np.sqrt(float(scale_dim))
    out = np.zeros((n_tok, n_tok))
    for k in range(n_windows):
        block = row_normalize_scaled(eye + bias[k] + mask[k], 1).weights
        out[np.ix_(windows[k], windows[k])] = block
    g = DenseGraph(out, row_normalized=True)
    if grid is None:
        grid = _default_grid(n_tok)
    return LayerAggregation(graph=g, layer_index=layer_index, source_grid=grid)


def mixer_aggregation(token_weight, scale_dim, *, layer_index=0,
                      grid=None) -> LayerAggregation:
    """Token-MLP graph: softmax of W^T / sqrt(dim).

    The transpose makes row i aggregate from source tokens j.
    """
    w = np.asarray(token_weight, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ShapeMismatch(f"token weight must be square, got {w.shape}")
    g = row_normalize_scaled(w.T, scale_dim)
    if grid is None:
        grid = _default_grid(w.shape[0])
    return LayerAggregation(graph=g, layer_index=layer_index, source_grid=grid)


def metaformer_aggregation(grid, kernel, *, layer_index=0) -> LayerAggregation:
    """Average-pooling graph: weight 1/K^2 to every in-grid node of the
    KxK window centered on each node.

    Border rows sum to |neighborhood|/K^2 < 1; no renormalization here.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise BadKernel(f"kernel must be odd and positive, got {kernel}")
    h, w = grid
    rows = np.arange(h * w) // w
    cols = np.arange(h * w) % w
    near = ((np.abs(rows[:, None] - rows[None, :]) <= kernel // 2)
            & (np.abs(cols[:, None] - cols[None, :]) <= kernel // 2))
    weights = near.astype(np.float64) / (kernel * kernel)
    return LayerAggregation(graph=DenseGraph(weights), layer_index=layer_index,
                            source_grid=(h, w))


def affine_graph(fc1, fc2, scale_dim) -> DenseGraph:
    """Channel-MLP graph: softmax of W1 W2 / sqrt(dim) over channels."""
    w1 = np.asarray(fc1, dtype=np.float64)
    w2 = np.asarray(fc2, dtype=np.float64)
    if w1.ndim != 2 or w2.ndim != 2 or w1.shape[1] != w2.shape[0] \
            or w1.shape[0] != w2.shape[1]:
        raise ShapeMismatch(f"incompatible MLP shapes {w1.shape} x {w2.shape}")
    g = row_normalize_scaled(w1 @ w2, scale_dim)
    g.node_kind = "channel"
    return g


# ---------------------------------------------------------------------------
# inter-layer resampling and composition


def downsample(layer: LayerAggregation, factor: int) -> LayerAggregation:
    """Block-sum pooling of the token graph with the written 1/K prefactor.

    Note rows of a stochastic input sum to K afterwards; the final
    composition softmax renormalizes.
    """
    if layer.has_class_token:
        raise IncompatibleGrid("detach the class token before resampling")
    h, w = layer.source_grid
    if factor < 1 or h % factor or w % factor:
        raise IndivisibleGrid(f"grid {layer.source_grid} not divisible by {factor}")
    h2, w2 = h // factor, w // factor
    a = layer.graph.weights.reshape(h2, factor, w2, factor, h2, factor, w2, factor)
    pooled = a.sum(axis=(1, 3, 5, 7)).reshape(h2 * w2, h2 * w2) / factor
    return LayerAggregation(graph=DenseGraph(pooled), layer_index=layer.layer_index,
                            source_grid=(h2, w2))


def upsample(layer: LayerAggregation, factor: int) -> LayerAggregation:
    """Nearest-neighbor expansion scaled by 1/K: out[x, y] = in[x//K, y//K]/K."""
    if factor < 1:
        raise IndivisibleGrid(f"factor must be >= 1, got {factor}")
    if layer.has_class_token:
        raise IncompatibleGrid("detach the class token before resampling")
    h, w = layer.source_grid
    a = layer.graph.weights.reshape(h, w, h, w)
    for axis in range(4):
        a = np.repeat(a, factor, axis=axis)
    out = a.reshape(h * w * factor * factor, h * w * factor * factor) / factor
    return LayerAggregation(graph=DenseGraph(out), layer_index=layer.layer_index,
                            source_grid=(h * factor, w * factor))


def canonicalize(layer: LayerAggregation, policy: str = "drop") -> CanonicalAggregation:
    """Resample one layer's graph to the 196-node grid, then apply the
    class-token policy (keep / drop / pad, final n in {196, 197}).

    The class token (node 0 when present) is held aside during spatial
    resampling; ``keep`` re-attaches its original row/column and is only
    available when no resampling was needed.
    """
    if policy not in ("keep", "drop", "pad"):
        raise BuilderError(f"unknown class-token policy {policy!r}")
    h, w = layer.source_grid
    weights = layer.graph.weights
    cls_row = cls_col = cls_self = None
    if layer.has_class_token:
        cls_self = weights[0, 0]
        cls_row, cls_col = weights[0, 1:].copy(), weights[1:, 0].copy()
        spatial = LayerAggregation(graph=DenseGraph(weights[1:, 1:]),
                                   layer_index=layer.layer_index, source_grid=(h, w))
    else:
        spatial = layer

    if (h, w) == (CANONICAL_SIDE, CANONICAL_SIDE):
        resampled = spatial
    elif h % CANONICAL_SIDE == 0 and w % CANONICAL_SIDE == 0 \
            and h // CANONICAL_SIDE == w // CANONICAL_SIDE:
        resampled = downsample(spatial, h // CANONICAL_SIDE)
    elif CANONICAL_SIDE % h == 0 and CANONICAL_SIDE % w == 0 \
            and CANONICAL_SIDE // h == CANONICAL_SIDE // w:
        resampled = upsample(spatial, CANONICAL_SIDE // h)
    else:
        raise IncompatibleGrid(
            f"grid {layer.source_grid} is not an integer multiple or divisor of "
            f"{CANONICAL_SIDE}x{CANONICAL_SIDE}")
    resampled_spatially = resampled is not spatial

    if policy == "drop" or (policy == "keep" and not layer.has_class_token):
        return CanonicalAggregation(graph=resampled.graph,
                                    class_token_policy="dropped")
    if policy == "keep":
        if resampled_spatially:
            raise IncompatibleGrid(
                "cannot keep the class token across spatial resampling")
        n = resampled.graph.n + 1
        out = np.zeros((n, n))
        out[1:, 1:] = resampled.graph.weights
        out[0, 0] = cls_self
        out[0, 1:] = cls_row
        out[1:, 0] = cls_col
        return CanonicalAggregation(graph=DenseGraph(out), class_token_policy="kept")
    # pad: synthesize a class node with uniform outgoing weights
    if layer.has_class_token and not resampled_spatially:
        return canonicalize(layer, policy="keep")
    n = resampled.graph.n + 1
    out = np.zeros((n, n))
    out[1:, 1:] = resampled.graph.weights
    out[0, :] = 1.0 / n
    return CanonicalAggregation(graph=DenseGraph(out), class_token_policy="padded")


def compose_layers(layers, order: str = "forward") -> DenseGraph:
    """Matrix-product composition of canonicalized layers followed by a
    row-wise softmax.

    ``forward`` applies layer 1 first to the token state, i.e. the
    product is A_L ... A_2 A_1.
    """
    mats = [l.graph.weights if isinstance(l, CanonicalAggregation)
            else l.weights if isinstance(l, DenseGraph) else np.asarray(l)
            for l in layers]
    if not mats:
        raise BuilderError("compose_layers needs at least one layer")
    n = mats[0].shape[0]
    if any(m.shape != (n, n) for m in mats):
        raise MixedSizes("all layers must share the same node count")
    product = mats[0]
    for m in mats[1:]:
        if order == "forward":
            product = m @ product
        elif order == "reverse":
            product = product @ m
        else:
            raise BuilderError(f"unknown composition order {order!r}")
    return row_normalize_scaled(product, 1)


# ---------------------------------------------------------------------------
# model-level pipeline


def _scale_dim(meta, stage: int) -> int:
    if meta.head_dim_for_scaling is not None:
        return meta.head_dim_for_scaling
    return meta.embed_dims[stage]


def layer_aggregation(model: ValidatedModel, layer: int,
                      head_mode: str = "whole") -> LayerAggregation:
    """Build one layer's aggregation graph from a validated archive."""
    meta = model.meta
    stage = meta.stage_of_layer(layer)
    grid = meta.token_grids[stage]
    scale = _scale_dim(meta, stage)
    if meta.family in ("vit", "deit"):
        heads = (meta.heads or [1])[stage]
        return vit_aggregation(
            model.tensor("pos_embed"),
            model.tensor(f"layer{layer}.q_weight"),
            model.tensor(f"layer{layer}.k_weight"),
            scale, layer_index=layer, grid=grid,
            has_class_token=meta.has_class_token, heads=heads, head_mode=head_mode)
    if meta.family == "swin":
        shift = (meta.shift_sizes or [0] * meta.depth)[layer]
        windows = swin_window_assignment(grid, meta.window_size, shift)
        return swin_aggregation(
            model.tensor(f"layer{layer}.rel_bias"),
            model.tensor(f"layer{layer}.attn_mask"),
            windows, scale, layer_index=layer, grid=grid)
    if meta.family == "mixer":
        return mixer_aggregation(model.tensor(f"layer{layer}.token_weight"),
                                 scale, layer_index=layer, grid=grid)
    if meta.family == "metaformer":
        return metaformer_aggregation(grid, meta.pool_kernel, layer_index=layer)
    raise BuilderError(f"unsupported family {meta.family!r}")


def layer_affine(model: ValidatedModel, layer: int) -> DenseGraph:
    """Build one layer's channel graph from its MLP weights."""
    stage = model.meta.stage_of_layer(layer)
    return affine_graph(model.tensor(f"layer{layer}.fc1"),
                        model.tensor(f"layer{layer}.fc2"),
                        _scale_dim(model.meta, stage))


@dataclass
class ModelMeasures:
    """Per-layer and across-layer-mean measures of one model."""

    aggregation: list[GraphMeasures]
    affine: list[GraphMeasures]
    aggregation_mean: GraphMeasures
    affine_mean: GraphMeasures


def _mean_measures(entries: list[GraphMeasures]) -> GraphMeasures:
    return GraphMeasures(
        clustering=float(np.mean([m.clustering for m in entries])),
        path_length=float(np.mean([m.path_length for m in entries])),
        connected_pair_fraction=float(np.mean([m.connected_pair_fraction
                                               for m in entries])))


def per_layer_measures(model: ValidatedModel, tau="auto",
                       head_mode: str = "whole") -> ModelMeasures:
    """Measures of every layer's aggregation and affine graph, plus the
    across-layer means used as the model-level representation."""
    agg, aff = [], []
    for layer in range(model.meta.depth):
        agg.append(graph_measures(layer_aggregation(model, layer, head_mode).graph, tau))
        aff.append(graph_measures(layer_affine(model, layer), tau))
    return ModelMeasures(aggregation=agg, affine=aff,
                         aggregation_mean=_mean_measures(agg),
                         affine_mean=_mean_measures(aff))


def composed_aggregation(model: ValidatedModel, policy: str = "drop",
                         head_mode: str = "whole",
                         order: str = "forward") -> DenseGraph:
    """Canonicalize every layer and compose them into the final
    model-level aggregation graph."""
    layers = [canonicalize(layer_aggregation(model, i, head_mode), policy)
              for i in range(model.meta.depth)]
    return compose_layers(layers, order=order)


def concatenated_aggregation(model: ValidatedModel,
                             head_mode: str = "whole") -> DenseGraph:
    """All layer aggregation graphs stacked along the diagonal."""
    return diagonal_concat([layer_aggregation(model, i, head_mode).graph
                            for i in range(model.meta.depth)])
