import pathlib
import sys

import numpy as np
import pytest

from relgraph import ModelArchive, ModelMeta

sys.path.insert(0, str(pathlib.Path(__file__).parent))

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


def make_vit_archive(depth=2, grid=(2, 2), d=4, cls=True, heads=1, seed=0,
                     family="vit"):
    rng = np.random.default_rng(seed)
    n_tok = grid[0] * grid[1] + (1 if cls else 0)
    meta = ModelMeta(family=family, depth=depth, embed_dims=[d],
                     token_grids=[grid], has_class_token=cls, heads=[heads])
    archive = ModelArchive(meta=meta)
    archive.add("pos_embed", rng.normal(size=(n_tok, d)))
    for i in range(depth):
        archive.add(f"layer{i}.q_weight", rng.normal(size=(d, d)))
        archive.add(f"layer{i}.k_weight", rng.normal(size=(d, d)))
        archive.add(f"layer{i}.fc1", rng.normal(size=(d, 2 * d)))
        archive.add(f"layer{i}.fc2", rng.normal(size=(2 * d, d)))
    return archive


def make_mixer_archive(depth=2, grid=(2, 2), d=4, seed=0):
    rng = np.random.default_rng(seed)
    n_tok = grid[0] * grid[1]
    meta = ModelMeta(family="mixer", depth=depth, embed_dims=[d],
                     token_grids=[grid])
    archive = ModelArchive(meta=meta)
    for i in range(depth):
        archive.add(f"layer{i}.token_weight", rng.normal(size=(n_tok, n_tok)))
        archive.add(f"layer{i}.fc1", rng.normal(size=(d, 2 * d)))
        archive.add(f"layer{i}.fc2", rng.normal(size=(2 * d, d)))
    return archive


def make_swin_archive(depth=2, grid=(4, 4), window=2, d=4, shifts=None, seed=0):
    rng = np.random.default_rng(seed)
    n_w = window * window
    n_windows = grid[0] * grid[1] // n_w
    shifts = list(shifts) if shifts is not None else [0] * depth
    meta = ModelMeta(family="swin", depth=depth, embed_dims=[d],
                     token_grids=[grid], window_size=window,
                     shift_sizes=shifts, heads=[1])
    archive = ModelArchive(meta=meta)
    for i in range(depth):
        archive.add(f"layer{i}.rel_bias", rng.normal(size=(n_w, n_w)))
        archive.add(f"layer{i}.attn_mask", np.zeros((n_windows, n_w, n_w)))
        archive.add(f"layer{i}.fc1", rng.normal(size=(d, 2 * d)))
        archive.add(f"layer{i}.fc2", rng.normal(size=(2 * d, d)))
    return archive


def make_metaformer_archive(depth=12, grid=(14, 14), kernel=3, d=6, seed=0):
    rng = np.random.default_rng(seed)
    meta = ModelMeta(family="metaformer", depth=depth, embed_dims=[d],
                     token_grids=[grid], pool_kernel=kernel)
    archive = ModelArchive(meta=meta)
    for i in range(depth):
        archive.add(f"layer{i}.fc1", rng.normal(size=(d, 2 * d)))
        archive.add(f"layer{i}.fc2", rng.normal(size=(2 * d, d)))
    return archive


@pytest.fixture
def vit_fixture_path():
    return FIXTURES / "vit_tiny_l0.rga"


@pytest.fixture
def connectome_dir():
    return FIXTURES / "connectomes"


@pytest.fixture
def ushape_csv():
    return FIXTURES / "ushape_points.csv"
