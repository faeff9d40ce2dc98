"""Bridge a torch checkpoint into the analysis pipeline.

Saves a synthetic ViT-style state dict, exports it with the companion
`relgraph-exporter` package, and measures the resulting archive.
Requires torch and the exporter package (see exporter/ in the source
tree).
"""

import json
import subprocess
import tempfile
from pathlib import Path

import numpy as np

try:
    import torch
    from relgraph_exporter import export_model
except ImportError as e:
    raise SystemExit(f"this demo needs the exporter extras: {e}")

rng = np.random.default_rng(0)
depth, d = 2, 8
sd = {"pos_embed": torch.from_numpy(
    rng.normal(size=(1, 5, d)).astype(np.float32))}
for i in range(depth):
    for key, shape in ((f"blocks.{i}.attn.qkv.weight", (3 * d, d)),
                       (f"blocks.{i}.mlp.fc1.weight", (2 * d, d)),
                       (f"blocks.{i}.mlp.fc2.weight", (d, 2 * d))):
        sd[key] = torch.from_numpy(rng.normal(size=shape).astype(np.float32))

config = {"family": "vit", "depth": depth, "embed_dims": [d],
          "token_grids": [[2, 2]], "has_class_token": True, "heads": [1]}

with tempfile.TemporaryDirectory() as tmp:
    archive = Path(tmp) / "demo_vit.rga"
    export_model("vit_demo", archive, state_dict=sd, config_json=config)
    print(f"exported {archive.name} ({archive.stat().st_size} bytes)")
    print(f"config: {json.dumps(config)}")

    out = Path(tmp) / "measures"
    subprocess.run(["relgraph", "measure", str(archive), "--out", str(out)],
                   check=True)
    print("\nmeasures.csv:")
    print((out / "measures.csv").read_text())
