import numpy as np
import pytest

from relgraph import (DenseGraph, affine_graph, canonicalize, compose_layers,
                      graph_measures, metaformer_aggregation,
                      mixer_aggregation, per_layer_measures, read_archive,
                      swin_aggregation, swin_window_assignment, upsample,
                      validate_archive, vit_aggregation)
from relgraph.builders import (BadKernel, BadWindowAssignment,
                               IncompatibleGrid, IndivisibleGrid,
                               LayerAggregation, MixedSizes, ShapeMismatch,
                               downsample, layer_aggregation)
from relgraph.graph import threshold_binarize

from conftest import make_metaformer_archive, make_vit_archive
from oracles import (oracle_binarize, oracle_clustering, oracle_matrix_chain,
                     oracle_path_length, oracle_pooling_graph, oracle_softmax)

E = np.e


def spatial_layer(weights, grid):
    return LayerAggregation(graph=DenseGraph(weights), layer_index=0,
                            source_grid=grid)


# --- per-family aggregation -------------------------------------------------

def test_vit_zero_pos_embed_is_uniform():
    layer = vit_aggregation(np.zeros((4, 3)), np.eye(3), np.eye(3), 3)
    np.testing.assert_allclose(layer.graph.weights, 0.25)


def test_vit_tiny_hand_example():
    layer = vit_aggregation([[1.0], [0.0]], [[1.0]], [[1.0]], 1, grid=(2, 1))
    np.testing.assert_allclose(layer.graph.weights[0],
                               [E / (E + 1), 1 / (E + 1)], atol=1e-12)
    np.testing.assert_allclose(layer.graph.weights[1], [0.5, 0.5])


def test_vit_fixture_node_count(vit_fixture_path):
    model = validate_archive(read_archive(vit_fixture_path))
    layer = layer_aggregation(model, 0)
    assert layer.graph.n == 5
    assert layer.has_class_token


def test_vit_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        vit_aggregation(np.zeros((4, 3)), np.eye(3), np.eye(4), 3)


def test_vit_per_head_mode_matches_whole_for_one_head():
    rng = np.random.default_rng(2)
    p, wq, wk = rng.normal(size=(5, 4)), rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
    whole = vit_aggregation(p, wq, wk, 4, grid=(5, 1), head_mode="whole")
    per = vit_aggregation(p, wq, wk, 4, grid=(5, 1), heads=1, head_mode="per-head")
    np.testing.assert_allclose(whole.graph.weights, per.graph.weights, atol=1e-12)
    two = vit_aggregation(p, wq, wk, 4, grid=(5, 1), heads=2, head_mode="per-head")
    np.testing.assert_allclose(two.graph.weights.sum(axis=1), 1.0, atol=1e-9)


def test_swin_identity_logits_block():
    windows = swin_window_assignment((4, 4), 2, 0)
    layer = swin_aggregation(np.zeros((4, 4)), np.zeros((4, 4, 4)), windows, 1)
    w = layer.graph.weights
    block = w[np.ix_(windows[0], windows[0])]
    np.testing.assert_allclose(np.diag(block), E / (E + 3), atol=1e-12)
    off = block[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, 1 / (E + 3), atol=1e-12)


def test_swin_cross_window_weights_are_zero():
    rng = np.random.default_rng(0)
    windows = swin_window_assignment((4, 4), 2, 0)
    layer = swin_aggregation(rng.normal(size=(4, 4, 4)),
                             rng.normal(size=(4, 4, 4)), windows, 9)
    w = layer.graph.weights
    same_window = np.zeros((16, 16), dtype=bool)
    for win in windows:
        same_window[np.ix_(win, win)] = True
    assert np.all(w[~same_window] == 0.0)
    # thresholded form keeps no cross-window edge either
    adj = threshold_binarize(layer.graph, 1e-9).adjacency
    assert not adj[~same_window].any()


def test_swin_mask_suppresses_pairs():
    windows = swin_window_assignment((2, 2), 2, 1)
    mask = np.zeros((1, 4, 4))
    mask[0, 0, 1] = -1e9
    layer = swin_aggregation(np.zeros((4, 4)), mask, windows, 1)
    assert layer.graph.weights[windows[0][0], windows[0][1]] < 1e-12


def test_swin_shifted_assignment_is_a_permutation():
    windows = swin_window_assignment((4, 4), 2, 1)
    assert sorted(windows.ravel().tolist()) == list(range(16))


def test_swin_bad_assignment():
    windows = np.array([[0, 1, 2, 2]])
    with pytest.raises(BadWindowAssignment):
        swin_aggregation(np.zeros((4, 4)), np.zeros((4, 4)), windows, 1)


def test_mixer_zero_and_diagonal():
    layer = mixer_aggregation(np.zeros((4, 4)), 5)
    np.testing.assert_allclose(layer.graph.weights, 0.25)
    big = mixer_aggregation(1000.0 * np.eye(4), 1)
    np.testing.assert_allclose(np.diag(big.graph.weights), 1.0, atol=1e-12)


def test_mixer_transpose_convention():
    layer = mixer_aggregation([[0.0, 1.0], [0.0, 0.0]], 1)
    np.testing.assert_allclose(layer.graph.weights[0], [0.5, 0.5])
    np.testing.assert_allclose(layer.graph.weights[1],
                               [E / (E + 1), 1 / (E + 1)], atol=1e-12)


def test_mixer_requires_square():
    with pytest.raises(ShapeMismatch):
        mixer_aggregation(np.zeros((196, 192)), 1)


def test_metaformer_kernel_one_is_identity():
    layer = metaformer_aggregation((3, 3), 1)
    np.testing.assert_array_equal(layer.graph.weights, np.eye(9))


def test_metaformer_row_sums_and_symmetry():
    layer = metaformer_aggregation((14, 14), 3)
    w = layer.graph.weights
    np.testing.assert_array_equal(w, w.T)
    # interior rows sum to 1, corner rows to 4/9
    interior = 5 * 14 + 5
    assert w[interior].sum() == pytest.approx(1.0)
    assert np.count_nonzero(w[interior]) == 9
    assert w[0].sum() == pytest.approx(4 / 9)
    np.testing.assert_array_equal(w, oracle_pooling_graph(14, 14, 3))


def test_metaformer_bad_kernel():
    with pytest.raises(BadKernel):
        metaformer_aggregation((4, 4), 2)
    with pytest.raises(BadKernel):
        metaformer_aggregation((4, 4), 0)


def test_affine_graph_hand_example():
    g = affine_graph([[1.0], [0.0]], [[1.0, 0.0]], 1)
    np.testing.assert_allclose(g.weights[0], [E / (E + 1), 1 / (E + 1)],
                               atol=1e-12)
    np.testing.assert_allclose(g.weights[1], [0.5, 0.5])
    assert g.node_kind == "channel"


def test_affine_uniform_and_fixture(vit_fixture_path):
    g = affine_graph(np.zeros((3, 7)), np.zeros((7, 3)), 3)
    np.testing.assert_allclose(g.weights, 1 / 3)
    model = validate_archive(read_archive(vit_fixture_path))
    from relgraph import layer_affine
    assert layer_affine(model, 0).n == 4


# --- resampling -------------------------------------------------------------

def test_downsample_uniform_closed_form():
    layer = spatial_layer(np.full((196, 196), 1 / 196), (14, 14))
    out = downsample(layer, 2)
    assert out.source_grid == (7, 7)
    np.testing.assert_allclose(out.graph.weights, 8 / 196, atol=1e-15)


def test_downsample_identity_graph():
    layer = spatial_layer(np.eye(196), (14, 14))
    out = downsample(layer, 2).graph.weights
    np.testing.assert_allclose(np.diag(out), 2.0)
    np.testing.assert_allclose(out - np.diag(np.diag(out)), 0.0)


def test_downsample_block_diagonal_stays_diagonal():
    blocks = np.zeros((16, 16))
    windows = swin_window_assignment((4, 4), 2, 0)
    for win in windows:
        blocks[np.ix_(win, win)] = 0.25
    out = downsample(spatial_layer(blocks, (4, 4)), 2).graph.weights
    np.testing.assert_allclose(out, np.diag(np.diag(out)))


def test_downsample_indivisible():
    with pytest.raises(IndivisibleGrid):
        downsample(spatial_layer(np.zeros((9, 9)), (3, 3)), 2)


def test_upsample_uniform_closed_form():
    layer = spatial_layer(np.full((49, 49), 1 / 49), (7, 7))
    out = upsample(layer, 2)
    assert out.source_grid == (14, 14)
    np.testing.assert_allclose(out.graph.weights, 1 / 98, atol=1e-15)


def test_upsample_identity_factor():
    w = np.random.default_rng(1).random((9, 9))
    out = upsample(spatial_layer(w, (3, 3)), 1)
    np.testing.assert_array_equal(out.graph.weights, w)


def test_upsample_entry_expansion():
    w = np.zeros((4, 4))
    w[0, 0] = 0.5
    out = upsample(spatial_layer(w, (2, 2)), 2).graph.weights
    # source node (0,0) expands to target nodes {(0,0),(0,1),(1,0),(1,1)}
    targets = [0, 1, 4, 5]
    np.testing.assert_allclose(out[np.ix_(targets, targets)], 0.25)
    assert out.sum() == pytest.approx(16 * 0.25)


def test_up_then_down_scales_uniform_by_k_squared():
    # the written 1/K prefactors sum K^4 entries per target pair, so the
    # round trip multiplies a uniform matrix by K^2 (renormalized away
    # by the composition softmax later)
    layer = spatial_layer(np.full((49, 49), 1 / 49), (7, 7))
    back = downsample(upsample(layer, 2), 2)
    np.testing.assert_allclose(back.graph.weights, 4 * layer.graph.weights,
                               atol=1e-15)


# --- canonicalize -----------------------------------------------------------

def test_canonicalize_identity_case():
    layer = spatial_layer(np.full((196, 196), 1 / 196), (14, 14))
    out = canonicalize(layer, "keep")
    assert out.graph.n == 196
    assert out.class_token_policy == "dropped"


def test_canonicalize_downsamples_28():
    layer = spatial_layer(np.full((784, 784), 1 / 784), (28, 28))
    out = canonicalize(layer, "drop")
    assert out.graph.n == 196


def test_canonicalize_upsamples_7():
    layer = spatial_layer(np.full((49, 49), 1 / 49), (7, 7))
    assert canonicalize(layer, "drop").graph.n == 196


def test_canonicalize_drop_class_token():
    rng = np.random.default_rng(3)
    layer = LayerAggregation(graph=DenseGraph(rng.random((197, 197))),
                             layer_index=0, source_grid=(14, 14),
                             has_class_token=True)
    out = canonicalize(layer, "drop")
    assert out.graph.n == 196
    np.testing.assert_array_equal(out.graph.weights,
                                  layer.graph.weights[1:, 1:])
    kept = canonicalize(layer, "keep")
    assert kept.graph.n == 197
    np.testing.assert_array_equal(kept.graph.weights, layer.graph.weights)


def test_canonicalize_pad_adds_uniform_class_row():
    layer = spatial_layer(np.full((196, 196), 1 / 196), (14, 14))
    out = canonicalize(layer, "pad")
    assert out.graph.n == 197
    np.testing.assert_allclose(out.graph.weights[0], 1 / 197)
    np.testing.assert_array_equal(out.graph.weights[1:, 0], 0)


def test_canonicalize_incompatible_grid():
    with pytest.raises(IncompatibleGrid):
        canonicalize(spatial_layer(np.zeros((25, 25)), (5, 5)), "drop")


# --- composition ------------------------------------------------------------

def test_compose_single_layer_is_softmax():
    w = np.random.default_rng(9).random((4, 4))
    out = compose_layers([DenseGraph(w)])
    np.testing.assert_allclose(out.weights, oracle_softmax(w, 1), atol=1e-12)


def test_compose_two_identities():
    out = compose_layers([DenseGraph(np.eye(2)), DenseGraph(np.eye(2))])
    np.testing.assert_allclose(out.weights,
                               [[E / (E + 1), 1 / (E + 1)],
                                [1 / (E + 1), E / (E + 1)]], atol=1e-12)


def test_compose_metaformer_two_hop_vs_oracle():
    pool = oracle_pooling_graph(4, 4, 3)
    layers = [metaformer_aggregation((4, 4), 3).graph for _ in range(2)]
    out = compose_layers(layers)
    expected = oracle_softmax(oracle_matrix_chain([pool, pool]), 1)
    np.testing.assert_allclose(out.weights, expected, atol=1e-12)


def test_compose_order_flag():
    rng = np.random.default_rng(12)
    a, b = rng.random((3, 3)), rng.random((3, 3))
    fwd = compose_layers([DenseGraph(a), DenseGraph(b)], order="forward")
    rev = compose_layers([DenseGraph(a), DenseGraph(b)], order="reverse")
    np.testing.assert_allclose(fwd.weights, oracle_softmax(b @ a, 1), atol=1e-12)
    np.testing.assert_allclose(rev.weights, oracle_softmax(a @ b, 1), atol=1e-12)


def test_compose_mixed_sizes():
    with pytest.raises(MixedSizes):
        compose_layers([DenseGraph(np.eye(2)), DenseGraph(np.eye(3))])


def test_compose_output_row_stochastic_for_nonstochastic_input():
    layers = [metaformer_aggregation((4, 4), 3).graph for _ in range(3)]
    out = compose_layers(layers)
    np.testing.assert_allclose(out.weights.sum(axis=1), 1.0, atol=1e-9)


# --- model pipeline ---------------------------------------------------------

def test_per_layer_measures_depth_one(vit_fixture_path):
    model = validate_archive(read_archive(vit_fixture_path))
    result = per_layer_measures(model)
    assert len(result.aggregation) == 1
    assert result.aggregation_mean == result.aggregation[0]
    assert result.affine_mean == result.affine[0]


def test_per_layer_measures_metaformer_layers_identical():
    model = validate_archive(make_metaformer_archive(depth=12, grid=(14, 14)))
    result = per_layer_measures(model)
    first = result.aggregation[0]
    assert all(m == first for m in result.aggregation)
    assert result.aggregation_mean.clustering == pytest.approx(first.clustering)
    assert result.aggregation_mean.path_length == pytest.approx(first.path_length)


def test_softmax_shift_invariance_propagates_to_measures():
    rng = np.random.default_rng(21)
    archive = make_vit_archive(depth=1, seed=21)
    model = validate_archive(archive)
    base = per_layer_measures(model).aggregation[0]
    # shifting every raw logit by a per-row constant leaves measures alone:
    # equivalent check through the softmax layer directly
    p = archive.get("pos_embed")
    raw = p @ archive.get("layer0.q_weight") @ archive.get("layer0.k_weight").T @ p.T
    from relgraph import row_normalize_scaled
    shifted = row_normalize_scaled(raw / 2.0 + rng.normal(size=(5, 1)), 1)
    unshifted = row_normalize_scaled(raw / 2.0, 1)
    assert graph_measures(shifted, "auto") == graph_measures(unshifted, "auto")
    assert base.clustering >= 0
