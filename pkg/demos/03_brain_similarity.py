"""Rank brain connectomes by distance to a model's (C, L) signature.

Writes three toy connectome edge lists, measures a pooling model, and
ranks the connectomes by Euclidean distance in measure space.
"""

import tempfile
from pathlib import Path

from relgraph import (bnn_distance, canonicalize, compose_layers,
                      graph_measures, metaformer_aggregation,
                      read_connectome)

EDGE_LISTS = {
    # triangle: maximally clustered, C=1, L=1
    "toy_worm": "a b\nb c\na c\n",
    # path: no triangles, C=0
    "toy_cat": "a b\nb c\nc d\n",
    # diamond: something in between
    "toy_rat": "a b\na c\nb c\nb d\nc d\n",
}

with tempfile.TemporaryDirectory() as tmp:
    conns = []
    for name, text in EDGE_LISTS.items():
        path = Path(tmp) / f"{name}.txt"
        path.write_text(text)
        conns.append(read_connectome(path))

    for conn in conns:
        m = conn.measures()
        print(f"{conn.name}: {conn.n} nodes, C={m.clustering:.3f}, "
              f"L={m.path_length:.3f}")

    # a 6-layer pooling model on the canonical grid as the query
    layers = [canonicalize(metaformer_aggregation((14, 14), 3), "drop")
              for _ in range(6)]
    query = graph_measures(compose_layers(layers), tau="auto")
    print(f"\nquery model: C={query.clustering:.3f}, "
          f"L={query.path_length:.3f}")

    report = bnn_distance(query, conns)
    print("\nranking (closest first):")
    for name, measures, dist in report.ranked:
        print(f"  {name}: distance {dist:.4f}")
