"""Build aggregation/affine graphs from a tiny random model and measure them.

Walks the whole pipeline by hand: raw weights -> row-stochastic graphs
-> composed model graph -> binarized measures (C, L).
"""

import numpy as np

from relgraph import (ModelArchive, ModelMeta, composed_aggregation,
                      graph_measures, per_layer_measures, validate_archive)

rng = np.random.default_rng(42)

# a 4-layer "vit" on a 7x7 patch grid with a class token, width 16
depth, grid, d = 4, (7, 7), 16
meta = ModelMeta(family="vit", depth=depth, embed_dims=[d],
                 token_grids=[grid], has_class_token=True, heads=[2])
archive = ModelArchive(meta=meta)
archive.add("pos_embed", rng.normal(size=(meta.n_tokens(), d)))
for i in range(depth):
    archive.add(f"layer{i}.q_weight", rng.normal(size=(d, d)))
    archive.add(f"layer{i}.k_weight", rng.normal(size=(d, d)))
    archive.add(f"layer{i}.fc1", rng.normal(size=(d, 2 * d)))
    archive.add(f"layer{i}.fc2", rng.normal(size=(2 * d, d)))

model = validate_archive(archive)
print(f"model: {meta.family}, depth {meta.depth}, {meta.n_tokens()} tokens")

print("\nper-layer measures (tau = 1/n):")
measures = per_layer_measures(model)
for i, (agg, aff) in enumerate(zip(measures.aggregation, measures.affine)):
    print(f"  layer {i}: aggregation C={agg.clustering:.4f} "
          f"L={agg.path_length:.4f} | affine C={aff.clustering:.4f} "
          f"L={aff.path_length:.4f}")

# compose all layers into one final aggregation graph on the canonical
# 14x14 grid (the class token is dropped before resampling)
final = composed_aggregation(model, policy="drop")
m = graph_measures(final, tau="auto")
print(f"\ncomposed model graph ({final.weights.shape[0]} nodes): "
      f"C={m.clustering:.4f}, L={m.path_length:.4f}, "
      f"connected pairs {m.connected_pair_fraction:.2%}")
