"""Reader/writer for the ``.rga`` tensor-archive format and family-aware
archive validation.

Layout of a ``.rga`` file::

    bytes 0..7    magic "RELGRAPH"
    bytes 8..15   u64 little-endian manifest byte length
    manifest      UTF-8 JSON: format_version, meta, tensor table
    payload       contiguous raw scalars, little-endian

Tensor table entries carry ``[name, dtype, shape, byte_offset,
byte_length]`` with offsets relative to the start of the payload.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"RELGRAPH"
FORMAT_VERSION = 1

FAMILIES = ("vit", "deit", "swin", "mixer", "metaformer")

_DTYPES = {"float32": np.dtype("<f4"), "float64": np.dtype("<f8")}


class ArchiveError(ValueError):
    pass


class BadMagic(ArchiveError):
    pass


class TruncatedPayload(ArchiveError):
    pass


class ManifestParseError(ArchiveError):
    pass


class ShapeMismatch(ArchiveError):
    pass


class MissingTensor(ArchiveError):
    def __init__(self, name):
        super().__init__(f"archive is missing tensor {name!r}")
        self.name = name


class WrongShape(ArchiveError):
    def __init__(self, name, expected, got):
        super().__init__(f"tensor {name!r}: expected shape {expected}, got {got}")
        self.name, self.expected, self.got = name, expected, got


class UnknownFamily(ArchiveError):
    pass


@dataclass
class TensorRecord:
    name: str
    data: np.ndarray  # row-major, float32 or float64

    @property
    def dtype_name(self) -> str:
        return {4: "float32", 8: "float64"}[self.data.dtype.itemsize]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)


@dataclass
class ModelMeta:
    """Architecture metadata needed to rebuild the relational graphs.

    ``embed_dims``, ``token_grids``, ``heads`` and ``stage_depths`` are
    per-stage lists (single-stage families use lists of length one);
    ``shift_sizes`` is per-layer.  ``head_dim_for_scaling`` is the
    denominator dimension used by the softmax scaling in per-head mode.
    """

    family: str
    depth: int
    embed_dims: list[int]
    token_grids: list[tuple[int, int]]
    has_class_token: bool = False
    heads: list[int] | None = None
    stage_depths: list[int] | None = None
    window_size: int | None = None
    shift_sizes: list[int] | None = None
    pool_kernel: int | None = None
    head_dim_for_scaling: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnknownFamily(f"unknown family {self.family!r}")
        self.token_grids = [tuple(g) for g in self.token_grids]
        if self.stage_depths is None:
            if len(self.embed_dims) != 1:
                raise ArchiveError("stage_depths required for multi-stage models")
            self.stage_depths = [self.depth]
        if sum(self.stage_depths) != self.depth:
            raise ArchiveError("stage_depths must sum to depth")
        if len(self.token_grids) != len(self.embed_dims):
            raise ArchiveError("token_grids and embed_dims must have equal length")
        if self.family == "swin" and self.window_size is None:
            raise ArchiveError("swin metadata requires window_size")
        if self.family == "metaformer" and self.pool_kernel is None:
            raise ArchiveError("metaformer metadata requires pool_kernel")

    def stage_of_layer(self, layer: int) -> int:
        if not 0 <= layer < self.depth:
            raise ArchiveError(f"layer {layer} out of range for depth {self.depth}")
        at = 0
        for s, d in enumerate(self.stage_depths):
            at += d
            if layer < at:
                return s
        raise AssertionError("unreachable")

    def n_tokens(self, stage: int = 0) -> int:
        h, w = self.token_grids[stage]
        return h * w + (1 if self.has_class_token else 0)

    def to_dict(self) -> dict:
        d = {
            "family": self.family,
            "depth": self.depth,
            "embed_dims": list(self.embed_dims),
            "token_grids": [list(g) for g in self.token_grids],
            "has_class_token": self.has_class_token,
            "stage_depths": list(self.stage_depths),
        }
        for key in ("heads", "window_size", "shift_sizes", "pool_kernel",
                    "head_dim_for_scaling"):
            val = getattr(self, key)
            if val is not None:
                d[key] = val
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelMeta":
        try:
            return cls(
                family=d["family"],
                depth=d["depth"],
                embed_dims=list(d["embed_dims"]),
                token_grids=[tuple(g) for g in d["token_grids"]],
                has_class_token=bool(d.get("has_class_token", False)),
                heads=d.get("heads"),
                stage_depths=d.get("stage_depths"),
                window_size=d.get("window_size"),
                shift_sizes=d.get("shift_sizes"),
                pool_kernel=d.get("pool_kernel"),
                head_dim_for_scaling=d.get("head_dim_for_scaling"),
            )
        except KeyError as e:
            raise ManifestParseError(f"meta is missing field {e}") from e


@dataclass
class ModelArchive:
    meta: ModelMeta
    tensors: dict[str, TensorRecord] = field(default_factory=dict)

    def add(self, name: str, data: np.ndarray) -> None:
        if name in self.tensors:
            raise ArchiveError(f"duplicate tensor name {name!r}")
        data = np.ascontiguousarray(data)
        if data.dtype not in (np.float32, np.float64):
            data = data.astype(np.float64)
        self.tensors[name] = TensorRecord(name=name, data=data)

    def get(self, name: str) -> np.ndarray:
        try:
            return self.tensors[name].data
        except KeyError:
            raise MissingTensor(name) from None


def write_archive(archive: ModelArchive, path) -> None:
    """Serialize deterministically: tensors in name-sorted order."""
    entries = []
    payload = bytearray()
    for name in sorted(archive.tensors):
        rec = archive.tensors[name]
        raw = rec.data.astype(rec.data.dtype.newbyteorder("<")).tobytes(order="C")
        entries.append({
            "name": name,
            "dtype": rec.dtype_name,
            "shape": list(rec.shape),
            "byte_offset": len(payload),
            "byte_length": len(raw),
        })
        payload.extend(raw)
    manifest = json.dumps(
        {"format_version": FORMAT_VERSION, "meta": archive.meta.to_dict(),
         "tensors": entries},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    tmp = Path(path).with_name(Path(path).name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(manifest)))
        f.write(manifest)
        f.write(bytes(payload))
    tmp.replace(path)


def read_archive(path) -> ModelArchive:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MAGIC:
        raise BadMagic(f"{path}: not a .rga archive")
    if len(blob) < 16:
        raise TruncatedPayload(f"{path}: missing manifest header")
    (mlen,) = struct.unpack("<Q", blob[8:16])
    if len(blob) < 16 + mlen:
        raise TruncatedPayload(f"{path}: manifest shorter than declared")
    try:
        manifest = json.loads(blob[16:16 + mlen].decode("utf-8"))
        version = manifest["format_version"]
        meta = ModelMeta.from_dict(manifest["meta"])
        entries = manifest["tensors"]
    except (ValueError, KeyError, TypeError) as e:
        if isinstance(e, ArchiveError):
            raise
        raise ManifestParseError(f"{path}: {e}") from e
    if version != FORMAT_VERSION:
        raise ManifestParseError(f"{path}: unsupported format_version {version}")
    payload = blob[16 + mlen:]
    archive = ModelArchive(meta=meta)
    for ent in entries:
        try:
            name, dtype = ent["name"], ent["dtype"]
            shape = tuple(ent["shape"])
            off, length = ent["byte_offset"], ent["byte_length"]
        except (KeyError, TypeError) as e:
            raise ManifestParseError(f"{path}: bad tensor entry: {e}") from e
        if dtype not in _DTYPES:
            raise ManifestParseError(f"{path}: unsupported dtype {dtype!r}")
        np_dtype = _DTYPES[dtype]
        n_scalars = int(np.prod(shape)) if shape else 1
        if length != n_scalars * np_dtype.itemsize:
            raise ShapeMismatch(
                f"{name}: shape {shape} does not match byte_length {length}")
        if off + length > len(payload):
            raise TruncatedPayload(f"{path}: payload shorter than manifest total")
        data = np.frombuffer(payload[off:off + length], dtype=np_dtype).reshape(shape)
        if name in archive.tensors:
            raise ManifestParseError(f"{path}: duplicate tensor name {name!r}")
        archive.tensors[name] = TensorRecord(name=name, data=data.copy())
    return archive


@dataclass
class ValidatedModel:
    """An archive whose tensor inventory matched its family's contract."""

    archive: ModelArchive

    @property
    def meta(self) -> ModelMeta:
        return self.archive.meta

    def tensor(self, name: str) -> np.ndarray:
        return self.archive.get(name)


def _expect(archive: ModelArchive, name: str, shape: tuple[int, ...]) -> np.ndarray:
    data = archive.get(name)
    if tuple(data.shape) != shape:
        raise WrongShape(name, shape, tuple(data.shape))
    return data


def _expect_mlp(archive: ModelArchive, layer: int, d: int) -> None:
    fc1 = archive.get(f"layer{layer}.fc1")
    if fc1.ndim != 2 or fc1.shape[0] != d:
        raise WrongShape(f"layer{layer}.fc1", (d, "h"), tuple(fc1.shape))
    hidden = fc1.shape[1]
    _expect(archive, f"layer{layer}.fc2", (hidden, d))


def validate_archive(archive: ModelArchive) -> ValidatedModel:
    """Check that every tensor the builders will read exists with the
    shape the family contract demands."""
    meta = archive.meta
    if meta.family not in FAMILIES:
        raise UnknownFamily(meta.family)
    for layer in range(meta.depth):
        stage = meta.stage_of_layer(layer)
        d = meta.embed_dims[stage]
        n_tok = meta.n_tokens(stage)
        if meta.family in ("vit", "deit"):
            _expect(archive, "pos_embed", (meta.n_tokens(0), meta.embed_dims[0]))
            _expect(archive, f"layer{layer}.q_weight", (d, d))
            _expect(archive, f"layer{layer}.k_weight", (d, d))
        elif meta.family == "swin":
            n_w = meta.window_size ** 2
            bias = archive.get(f"layer{layer}.rel_bias")
            if tuple(bias.shape) != (n_w, n_w):
                raise WrongShape(f"layer{layer}.rel_bias", (n_w, n_w), tuple(bias.shape))
            mask = archive.get(f"layer{layer}.attn_mask")
            if mask.ndim != 3 or mask.shape[1:] != (n_w, n_w):
                raise WrongShape(f"layer{layer}.attn_mask",
                                 ("n_windows", n_w, n_w), tuple(mask.shape))
        elif meta.family == "mixer":
            _expect(archive, f"layer{layer}.token_weight", (n_tok, n_tok))
        elif meta.family == "metaformer":
            pass  # pooling has no learned mixer weights
        _expect_mlp(archive, layer, d)
    return ValidatedModel(archive=archive)
