"""Track graph measures across a simulated training run.

Interpolates between a random-init and a "trained" weight set to fake a
checkpoint series, then reports the (C, L) trajectory the way the
`track` command would.
"""

import numpy as np

from relgraph import ModelArchive, ModelMeta, training_series

rng = np.random.default_rng(11)
depth, grid, d = 3, (8, 8), 12
meta = ModelMeta(family="mixer", depth=depth, embed_dims=[d],
                 token_grids=[grid])
n_tok = meta.n_tokens()

init = {f"layer{i}.token_weight": rng.normal(size=(n_tok, n_tok))
        for i in range(depth)}
final = {name: rng.normal(size=(n_tok, n_tok)) * 3 for name in init}


def checkpoint(alpha):
    archive = ModelArchive(meta=meta)
    for i in range(depth):
        name = f"layer{i}.token_weight"
        archive.add(name, (1 - alpha) * init[name] + alpha * final[name])
        archive.add(f"layer{i}.fc1", rng.normal(size=(d, 2 * d)))
        archive.add(f"layer{i}.fc2", rng.normal(size=(2 * d, d)))
    return archive


epochs = [0, 5, 10, 20, 40]
series = [(e, checkpoint(e / epochs[-1])) for e in epochs]

print("epoch  C_agg   L_agg   C_aff   L_aff")
for epoch, c_agg, l_agg, c_aff, l_aff in training_series(series):
    print(f"{epoch:5d}  {c_agg:.4f}  {l_agg:.4f}  {c_aff:.4f}  {l_aff:.4f}")
