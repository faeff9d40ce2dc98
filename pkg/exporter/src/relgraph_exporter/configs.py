"""Architecture configurations keyed by model-zoo names.

State dicts carry weights but not hyperparameters like head counts or
window sizes, so known model names map to their published configs; a
JSON config file can describe anything else.
"""

from __future__ import annotations

from dataclasses import dataclass


class UnknownModel(ValueError):
    pass


class UnsupportedFamily(ValueError):
    pass


@dataclass
class ArchConfig:
    family: str
    depth: int
    embed_dims: list[int]
    token_grids: list[tuple[int, int]]
    stage_depths: list[int]
    has_class_token: bool = False
    heads: list[int] | None = None
    window_size: int | None = None
    shift_sizes: list[int] | None = None
    pool_kernel: int | None = None

    def meta_dict(self) -> dict:
        d = {
            "family": self.family,
            "depth": self.depth,
            "embed_dims": list(self.embed_dims),
            "token_grids": [list(g) for g in self.token_grids],
            "stage_depths": list(self.stage_depths),
            "has_class_token": self.has_class_token,
        }
        if self.heads is not None:
            d["heads"] = list(self.heads)
        if self.window_size is not None:
            d["window_size"] = self.window_size
        if self.shift_sizes is not None:
            d["shift_sizes"] = list(self.shift_sizes)
        if self.pool_kernel is not None:
            d["pool_kernel"] = self.pool_kernel
        return d


def _vit(depth, dim, heads, family="vit"):
    return ArchConfig(family=family, depth=depth, embed_dims=[dim],
                      token_grids=[(14, 14)], stage_depths=[depth],
                      has_class_token=True, heads=[heads])


def _swin(depths, dims, heads, window=7):
    grids = [(56, 56), (28, 28), (14, 14), (7, 7)][:len(depths)]
    shifts = []
    for stage_depth in depths:
        shifts += [0 if b % 2 == 0 else window // 2 for b in range(stage_depth)]
    return ArchConfig(family="swin", depth=sum(depths), embed_dims=list(dims),
                      token_grids=grids, stage_depths=list(depths),
                      heads=list(heads), window_size=window,
                      shift_sizes=shifts)


def _mixer(depth, dim):
    return ArchConfig(family="mixer", depth=depth, embed_dims=[dim],
                      token_grids=[(14, 14)], stage_depths=[depth])


def _poolformer(depths, dims, kernel=3):
    grids = [(56, 56), (28, 28), (14, 14), (7, 7)][:len(depths)]
    return ArchConfig(family="metaformer", depth=sum(depths),
                      embed_dims=list(dims), token_grids=grids,
                      stage_depths=list(depths), pool_kernel=kernel)


KNOWN_MODELS = {
    "vit_tiny_patch16_224": _vit(12, 192, 3),
    "vit_small_patch16_224": _vit(12, 384, 6),
    "vit_base_patch16_224": _vit(12, 768, 12),
    "deit_tiny_patch16_224": _vit(12, 192, 3, family="deit"),
    "deit_small_patch16_224": _vit(12, 384, 6, family="deit"),
    "deit_base_patch16_224": _vit(12, 768, 12, family="deit"),
    "swin_tiny_patch4_window7_224": _swin((2, 2, 6, 2), (96, 192, 384, 768),
                                          (3, 6, 12, 24)),
    "swin_small_patch4_window7_224": _swin((2, 2, 18, 2), (96, 192, 384, 768),
                                           (3, 6, 12, 24)),
    "mixer_s16_224": _mixer(8, 512),
    "mixer_b16_224": _mixer(12, 768),
    "poolformer_s12": _poolformer((2, 2, 6, 2), (64, 128, 320, 512)),
    "poolformer_s24": _poolformer((4, 4, 12, 4), (64, 128, 320, 512)),
}

_FAMILY_PREFIXES = ("vit", "deit", "swin", "mixer", "poolformer", "metaformer")


def infer_family(model_name: str) -> str:
    prefix = model_name.split("_", 1)[0].lower()
    if prefix not in _FAMILY_PREFIXES:
        raise UnsupportedFamily(
            f"cannot infer a supported family from {model_name!r}")
    return "metaformer" if prefix in ("poolformer", "metaformer") else prefix


def config_for(model_name: str, config_json: dict | None = None) -> ArchConfig:
    if config_json is not None:
        d = dict(config_json)
        if "family" not in d:
            d["family"] = infer_family(model_name)
        d["token_grids"] = [tuple(g) for g in d["token_grids"]]
        d.setdefault("stage_depths", [d["depth"]])
        return ArchConfig(**d)
    try:
        return KNOWN_MODELS[model_name]
    except KeyError:
        raise UnknownModel(
            f"{model_name!r} is not a known model; pass --config") from None
