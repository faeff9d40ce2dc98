"""Checkpoint-to-archive exporter for the relational-graph toolkit."""

from .configs import ArchConfig, UnknownModel, UnsupportedFamily, config_for
from .export import (BadCheckpoint, DownloadFailure, InconsistentArchitecture,
                     export_model, export_series, map_checkpoint,
                     relative_position_index, swin_shift_mask)
from .rga_writer import write_rga

__version__ = "0.1.0"

__all__ = [
    "ArchConfig", "BadCheckpoint", "DownloadFailure",
    "InconsistentArchitecture", "UnknownModel", "UnsupportedFamily",
    "config_for", "export_model", "export_series", "map_checkpoint",
    "relative_position_index", "swin_shift_mask", "write_rga",
]
