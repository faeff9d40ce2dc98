"""Turn torch checkpoints into ``.rga`` archives.

The exporter is a pure format bridge: it renames, reshapes, and (for a
couple of documented cases) folds checkpoint tensors, but computes no
graphs or measures.  Values land in the archive bitwise as float32.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .configs import ArchConfig, UnknownModel, UnsupportedFamily, config_for
from .rga_writer import write_rga


class DownloadFailure(RuntimeError):
    pass


class InconsistentArchitecture(ValueError):
    pass


class BadCheckpoint(ValueError):
    pass


MASK_NEG = -1e9

_EPOCH_PATTERNS = (re.compile(r"_e(\d+)\.(?:pth|pt|bin)$"),
                   re.compile(r"epoch[_-]?(\d+)"),
                   re.compile(r"(\d+)\.(?:pth|pt|bin)$"))


def load_checkpoint(path) -> dict:
    """Load a torch checkpoint as a flat name->tensor dict."""
    import torch

    try:
        obj = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise BadCheckpoint(f"{path}: {e}") from e
    for key in ("state_dict", "model"):
        if isinstance(obj, dict) and key in obj and isinstance(obj[key], dict):
            obj = obj[key]
    if not isinstance(obj, dict):
        raise BadCheckpoint(f"{path}: checkpoint is not a state dict")
    return obj


def fetch_checkpoint(model_name: str) -> dict:
    """Download from the model zoo; offline environments get a clear error."""
    import torch

    try:
        url = _ZOO_URLS[model_name]
    except KeyError:
        raise DownloadFailure(
            f"no download URL on file for {model_name!r}; use --local") from None
    try:
        return torch.hub.load_state_dict_from_url(url, map_location="cpu",
                                                  check_hash=False)
    except Exception as e:
        raise DownloadFailure(f"{model_name}: {e}") from e


# Best-effort zoo URLs; historical availability is not guaranteed.
_ZOO_URLS = {
    "deit_tiny_patch16_224":
        "https://dl.fbaipublicfiles.com/deit/deit_tiny_patch16_224-a1311bcf.pth",
    "deit_small_patch16_224":
        "https://dl.fbaipublicfiles.com/deit/deit_small_patch16_224-cd65a155.pth",
    "deit_base_patch16_224":
        "https://dl.fbaipublicfiles.com/deit/deit_base_patch16_224-b5f2ef4d.pth",
    "swin_tiny_patch4_window7_224":
        "https://github.com/SwinTransformer/storage/releases/download/v1.0.0/"
        "swin_tiny_patch4_window7_224.pth",
}


def _np32(t) -> np.ndarray:
    arr = t.detach().cpu().numpy() if hasattr(t, "detach") else np.asarray(t)
    return np.ascontiguousarray(arr.astype(np.float32, copy=False))


def _get(sd: dict, *candidates: str):
    for key in candidates:
        if key in sd:
            return sd[key]
    raise BadCheckpoint(f"checkpoint has none of {candidates}")


def _channel_mlp(sd, prefix, out, layer):
    """fc1/fc2 stored torch-style [out, in]; the archive wants [in, out]."""
    fc1 = _np32(_get(sd, f"{prefix}.mlp.fc1.weight",
                     f"{prefix}.mlp_channels.fc1.weight"))
    fc2 = _np32(_get(sd, f"{prefix}.mlp.fc2.weight",
                     f"{prefix}.mlp_channels.fc2.weight"))
    if fc1.ndim == 4:  # 1x1 conv formulation (poolformer)
        fc1 = fc1[:, :, 0, 0]
        fc2 = fc2[:, :, 0, 0]
    out[f"layer{layer}.fc1"] = fc1.T
    out[f"layer{layer}.fc2"] = fc2.T


def _vit_tensors(sd: dict, cfg: ArchConfig) -> dict:
    d = cfg.embed_dims[0]
    out = {}
    pos = _np32(_get(sd, "pos_embed"))
    if pos.ndim == 3:
        pos = pos[0]
    n_expect = cfg.token_grids[0][0] * cfg.token_grids[0][1] + 1
    if pos.shape[0] == n_expect + 1 and cfg.family == "deit":
        # distillation token sits at row 1; the graph uses class + patches
        pos = np.ascontiguousarray(np.delete(pos, 1, axis=0))
    if pos.shape[0] != n_expect:
        raise InconsistentArchitecture(
            f"pos_embed has {pos.shape[0]} rows, expected {n_expect}")
    out["pos_embed"] = pos
    for i in range(cfg.depth):
        qkv = _np32(_get(sd, f"blocks.{i}.attn.qkv.weight"))
        if qkv.shape != (3 * d, d):
            raise InconsistentArchitecture(
                f"blocks.{i}.attn.qkv.weight has shape {qkv.shape}")
        # torch Linear stores W as [out, in]; x @ W.T means the column-space
        # projection matrices are the transposes of the stored slices
        out[f"layer{i}.q_weight"] = np.ascontiguousarray(qkv[:d].T)
        out[f"layer{i}.k_weight"] = np.ascontiguousarray(qkv[d:2 * d].T)
        _channel_mlp(sd, f"blocks.{i}", out, i)
    return out


def relative_position_index(window: int) -> np.ndarray:
    """Standard Swin lookup: [M^2, M^2] indices into the (2M-1)^2 table."""
    coords = np.stack(np.meshgrid(np.arange(window), np.arange(window),
                                  indexing="ij")).reshape(2, -1)
    rel = coords[:, :, None] - coords[:, None, :]
    rel = rel.transpose(1, 2, 0) + (window - 1)
    return rel[:, :, 0] * (2 * window - 1) + rel[:, :, 1]


def swin_shift_mask(grid, window: int, shift: int) -> np.ndarray:
    """[n_windows, M^2, M^2] additive mask: 0 within a region, -1e9 across.

    Slot ordering matches the cyclic-shift window partition the analysis
    package uses: window (wi, wj) slot (a, b) holds original token
    ((wi*M + a + shift) % h, (wj*M + b + shift) % w).
    """
    h, w = grid
    n_windows = (h // window) * (w // window)
    if shift == 0:
        return np.zeros((n_windows, window * window, window * window),
                        dtype=np.float32)
    # region labels live on the cyclically shifted canvas: slot (a, b) of
    # window (wi, wj) sits at shifted position (wi*M + a, wj*M + b), and
    # pairs straddling a region boundary are masked out
    region = np.zeros((h, w), dtype=np.int64)
    tag = 0
    for hs in (slice(0, h - window), slice(h - window, h - shift),
               slice(h - shift, h)):
        for ws in (slice(0, w - window), slice(w - window, w - shift),
                   slice(w - shift, w)):
            region[hs, ws] = tag
            tag += 1
    mask = np.empty((n_windows, window * window, window * window),
                    dtype=np.float32)
    k = 0
    for wi in range(h // window):
        for wj in range(w // window):
            block = region[wi * window:(wi + 1) * window,
                           wj * window:(wj + 1) * window]
            labels = block.reshape(-1)
            mask[k] = np.where(labels[:, None] == labels[None, :],
                               0.0, MASK_NEG)
            k += 1
    return mask


def _swin_tensors(sd: dict, cfg: ArchConfig) -> dict:
    out = {}
    window = cfg.window_size
    index = relative_position_index(window)
    layer = 0
    for stage, stage_depth in enumerate(cfg.stage_depths):
        for block in range(stage_depth):
            prefix = f"layers.{stage}.blocks.{block}"
            table = _np32(_get(
                sd, f"{prefix}.attn.relative_position_bias_table"))
            if table.shape[0] != (2 * window - 1) ** 2:
                raise InconsistentArchitecture(
                    f"{prefix}: bias table has {table.shape[0]} rows, "
                    f"window {window} needs {(2 * window - 1) ** 2}")
            # [(2M-1)^2, H] -> [M^2, M^2] averaged over heads: the archive
            # carries one aggregation graph per layer, not per head
            out[f"layer{layer}.rel_bias"] = table[index].mean(axis=2)
            out[f"layer{layer}.attn_mask"] = swin_shift_mask(
                cfg.token_grids[stage], window, cfg.shift_sizes[layer])
            _channel_mlp(sd, prefix, out, layer)
            layer += 1
    return out


def _mixer_tensors(sd: dict, cfg: ArchConfig, include_raw: bool) -> dict:
    out = {}
    for i in range(cfg.depth):
        fc1 = _np32(_get(sd, f"blocks.{i}.mlp_tokens.fc1.weight"))
        fc2 = _np32(_get(sd, f"blocks.{i}.mlp_tokens.fc2.weight"))
        # linearized token mixer: fold the two MLP matrices (nonlinearity
        # dropped) into the single square weight the archive format wants
        out[f"layer{i}.token_weight"] = np.ascontiguousarray(
            fc1.T @ fc2.T).astype(np.float32)
        if include_raw:
            out[f"raw.layer{i}.token_fc1"] = fc1
            out[f"raw.layer{i}.token_fc2"] = fc2
        _channel_mlp(sd, f"blocks.{i}", out, i)
    return out


def _metaformer_tensors(sd: dict, cfg: ArchConfig) -> dict:
    out = {}
    # timm places poolformer stages at network indices 0, 2, 4, 6
    layer = 0
    for stage, stage_depth in enumerate(cfg.stage_depths):
        for block in range(stage_depth):
            found = False
            for prefix in (f"network.{2 * stage}.{block}",
                           f"stages.{stage}.blocks.{block}"):
                if any(k.startswith(prefix + ".") for k in sd):
                    _channel_mlp(sd, prefix, out, layer)
                    found = True
                    break
            if not found:
                raise InconsistentArchitecture(
                    f"no tensors for stage {stage} block {block}")
            layer += 1
    return out


def map_checkpoint(sd: dict, cfg: ArchConfig, include_raw=False) -> dict:
    if cfg.family in ("vit", "deit"):
        return _vit_tensors(sd, cfg)
    if cfg.family == "swin":
        return _swin_tensors(sd, cfg)
    if cfg.family == "mixer":
        return _mixer_tensors(sd, cfg, include_raw)
    if cfg.family == "metaformer":
        return _metaformer_tensors(sd, cfg)
    raise UnsupportedFamily(cfg.family)


def export_model(model_name: str, out_path, *, local=None, state_dict=None,
                 config_json=None, include_raw=False, epoch=None) -> Path:
    cfg = config_for(model_name, config_json)
    if state_dict is None:
        sd = load_checkpoint(local) if local else fetch_checkpoint(model_name)
    else:
        sd = state_dict
    tensors = map_checkpoint(sd, cfg, include_raw)
    meta = cfg.meta_dict()
    meta["model_name"] = model_name
    if epoch is not None:
        meta["epoch"] = int(epoch)
    out_path = Path(out_path)
    write_rga(out_path, meta, tensors)
    return out_path


def _epoch_from_name(name: str) -> int | None:
    for pat in _EPOCH_PATTERNS:
        m = pat.search(name)
        if m:
            return int(m.group(1))
    return None


def export_series(ckpt_dir, model_name: str, out_dir, *, config_json=None,
                  include_raw=False) -> list[Path]:
    """One archive per checkpoint file, named ``<model>_e<N>.rga``."""
    ckpt_dir = Path(ckpt_dir)
    files = sorted(p for p in ckpt_dir.iterdir()
                   if p.suffix in (".pth", ".pt", ".bin"))
    if not files:
        raise BadCheckpoint(f"no checkpoint files in {ckpt_dir}")
    cfg = config_for(model_name, config_json)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    key_sets = None
    written = []
    for pos, path in enumerate(files):
        sd = load_checkpoint(path)
        keys = frozenset(k for k in sd
                         if hasattr(sd[k], "shape"))
        shapes = {k: tuple(sd[k].shape) for k in keys}
        if key_sets is None:
            key_sets = shapes
        elif shapes != key_sets:
            raise InconsistentArchitecture(
                f"{path.name} does not match the first checkpoint's layout")
        epoch = _epoch_from_name(path.name)
        if epoch is None:
            epoch = pos
        out_path = out_dir / f"{model_name}_e{epoch}.rga"
        export_model(model_name, out_path, state_dict=sd,
                     config_json=config_json, include_raw=include_raw,
                     epoch=epoch)
        written.append(out_path)
    return written
