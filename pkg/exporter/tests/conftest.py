"""Synthetic torch checkpoints, one small architecture per family.

The analysis package is used only through its public surfaces: the
``relgraph`` command and the documented ``.rga`` byte layout.
"""

import json
import shutil
import struct
import subprocess

import numpy as np
import pytest
import torch

RELGRAPH = shutil.which("relgraph")


def run_relgraph(*args):
    return subprocess.run([RELGRAPH, *args], capture_output=True, text=True)


# --- minimal standalone .rga reader (format contract, not shared code) ------

def read_rga(path):
    blob = open(path, "rb").read()
    assert blob[:8] == b"RELGRAPH"
    (mlen,) = struct.unpack("<Q", blob[8:16])
    manifest = json.loads(blob[16:16 + mlen])
    payload = blob[16 + mlen:]
    tensors = {}
    for ent in manifest["tensors"]:
        raw = payload[ent["byte_offset"]:ent["byte_offset"] + ent["byte_length"]]
        tensors[ent["name"]] = np.frombuffer(raw, dtype="<f4").reshape(ent["shape"])
    return manifest["meta"], tensors


# --- synthetic state dicts --------------------------------------------------

def _t(rng, *shape):
    return torch.from_numpy(rng.normal(size=shape).astype(np.float32))


def vit_state_dict(depth=2, grid=2, d=4, seed=0, extra_token=False):
    rng = np.random.default_rng(seed)
    n = grid * grid + 1 + (1 if extra_token else 0)
    sd = {"pos_embed": _t(rng, 1, n, d)}
    for i in range(depth):
        sd[f"blocks.{i}.attn.qkv.weight"] = _t(rng, 3 * d, d)
        sd[f"blocks.{i}.mlp.fc1.weight"] = _t(rng, 2 * d, d)
        sd[f"blocks.{i}.mlp.fc2.weight"] = _t(rng, d, 2 * d)
    return sd


VIT_CONFIG = {"family": "vit", "depth": 2, "embed_dims": [4],
              "token_grids": [[2, 2]], "has_class_token": True, "heads": [1]}


def swin_state_dict(depth=2, window=7, d=4, seed=0):
    rng = np.random.default_rng(seed)
    sd = {}
    for b in range(depth):
        prefix = f"layers.0.blocks.{b}"
        sd[f"{prefix}.attn.relative_position_bias_table"] = \
            _t(rng, (2 * window - 1) ** 2, 2)
        sd[f"{prefix}.mlp.fc1.weight"] = _t(rng, 2 * d, d)
        sd[f"{prefix}.mlp.fc2.weight"] = _t(rng, d, 2 * d)
    return sd


SWIN_CONFIG = {"family": "swin", "depth": 2, "embed_dims": [4],
               "token_grids": [[14, 14]], "stage_depths": [2],
               "heads": [2], "window_size": 7, "shift_sizes": [0, 3]}


def mixer_state_dict(depth=2, n_tok=4, d=4, seed=0):
    rng = np.random.default_rng(seed)
    sd = {}
    for i in range(depth):
        sd[f"blocks.{i}.mlp_tokens.fc1.weight"] = _t(rng, 3, n_tok)
        sd[f"blocks.{i}.mlp_tokens.fc2.weight"] = _t(rng, n_tok, 3)
        sd[f"blocks.{i}.mlp_channels.fc1.weight"] = _t(rng, 2 * d, d)
        sd[f"blocks.{i}.mlp_channels.fc2.weight"] = _t(rng, d, 2 * d)
    return sd


MIXER_CONFIG = {"family": "mixer", "depth": 2, "embed_dims": [4],
                "token_grids": [[2, 2]]}


def poolformer_state_dict(depth=2, d=4, seed=0):
    rng = np.random.default_rng(seed)
    sd = {}
    for b in range(depth):
        prefix = f"network.0.{b}"
        sd[f"{prefix}.mlp.fc1.weight"] = _t(rng, 2 * d, d, 1, 1)
        sd[f"{prefix}.mlp.fc2.weight"] = _t(rng, d, 2 * d, 1, 1)
    return sd


POOL_CONFIG = {"family": "metaformer", "depth": 2, "embed_dims": [4],
               "token_grids": [[14, 14]], "stage_depths": [2],
               "pool_kernel": 3}


FAMILY_CASES = {
    "vit": (vit_state_dict, VIT_CONFIG),
    "deit": (vit_state_dict, {**VIT_CONFIG, "family": "deit"}),
    "swin": (swin_state_dict, SWIN_CONFIG),
    "mixer": (mixer_state_dict, MIXER_CONFIG),
    "metaformer": (poolformer_state_dict, POOL_CONFIG),
}


@pytest.fixture
def save_checkpoint(tmp_path):
    def save(sd, name="ckpt.pth"):
        path = tmp_path / name
        torch.save(sd, path)
        return path
    return save
