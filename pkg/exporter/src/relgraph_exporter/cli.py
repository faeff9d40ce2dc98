"""Command line for checkpoint-to-archive export.

Exit codes: 0 success, 2 input or validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import export as ex
from .configs import UnknownModel, UnsupportedFamily

EXIT_INPUT = 2
EXIT_IO = 3


def _load_config(path):
    if path is None:
        return None
    with open(path) as f:
        return json.load(f)


def cmd_export(args) -> int:
    out = ex.export_model(args.model, args.out, local=args.local,
                          config_json=_load_config(args.config),
                          include_raw=args.raw, epoch=args.epoch)
    print(f"wrote {out}")
    return 0


def cmd_series(args) -> int:
    written = ex.export_series(args.dir, args.model, args.out,
                               config_json=_load_config(args.config),
                               include_raw=args.raw)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relgraph-export",
        description="export model checkpoints to .rga archives")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="export one checkpoint")
    p.add_argument("--model", required=True, help="model zoo identifier")
    p.add_argument("--out", required=True, help="output .rga path")
    p.add_argument("--epoch", type=int, default=None,
                   help="epoch tag recorded in the archive meta")
    p.add_argument("--local", default=None,
                   help="read this checkpoint file instead of downloading")
    p.add_argument("--config", default=None,
                   help="JSON architecture config for unknown model names")
    p.add_argument("--raw", action="store_true",
                   help="also store unfolded token-MLP matrices (mixer)")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("series", help="export a directory of checkpoints")
    p.add_argument("--model", required=True)
    p.add_argument("--dir", required=True, help="directory of .pth/.pt files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", default=None)
    p.add_argument("--raw", action="store_true")
    p.set_defaults(func=cmd_series)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UnknownModel, UnsupportedFamily, ex.InconsistentArchitecture,
            ex.BadCheckpoint) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (ex.DownloadFailure, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
