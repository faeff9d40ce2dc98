"""Command-line surface: measure / layers / compose / compare-bnn /
sweetspot / track (+ extract, delegated to the exporter package).

Exit codes: 0 success, 2 input or validation error, 3 I/O error,
4 degenerate analysis.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import analysis, builders, svgplot
from .archive import ArchiveError, read_archive, validate_archive
from .builders import BuilderError
from .connectome import ConnectomeError, read_connectome
from .graph import GraphError, graph_measures

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 3
EXIT_DEGENERATE = 4


def _fnum(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".9g")


def _write_csv(path, header, rows, footer_comments=()):
    """Atomic, locale-independent CSV write (CRLF, 9 significant digits)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fnum(v) if isinstance(v, float) else v for v in row])
    for comment in footer_comments:
        buf.write(f"# {comment}\r\n")
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        f.write(buf.getvalue())
    os.replace(tmp, path)


def _write_json(path, payload):
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, allow_nan=True)
        f.write("\n")
    os.replace(tmp, path)


def _load_model(path):
    return validate_archive(read_archive(path))


def _measure_rows(model, tau, head_mode):
    per = builders.per_layer_measures(model, tau, head_mode)
    rows = []
    for layer in range(model.meta.depth):
        stage = model.meta.stage_of_layer(layer)
        a, f = per.aggregation[layer], per.affine[layer]
        rows.append(["layer", layer, model.meta.n_tokens(stage),
                     model.meta.embed_dims[stage],
                     a.clustering, a.path_length, a.connected_pair_fraction,
                     f.clustering, f.path_length, f.connected_pair_fraction])
    return per, rows


_MEASURE_HEADER = ["scope", "layer", "n_tokens", "embed_dim",
                   "c_agg", "l_agg", "cpf_agg", "c_aff", "l_aff", "cpf_aff"]


def _model_row(model, per, args):
    if args.mode == "compose":
        composed = builders.composed_aggregation(
            model, policy=args.class_token, head_mode=args.head_mode)
        agg = graph_measures(composed, args.tau)
        n_tok = composed.n
    else:
        agg = per.aggregation_mean
        n_tok = model.meta.n_tokens(0)
    aff = per.affine_mean
    return ["model", "", n_tok, model.meta.embed_dims[0],
            agg.clustering, agg.path_length, agg.connected_pair_fraction,
            aff.clustering, aff.path_length, aff.connected_pair_fraction], agg


def cmd_measure(args) -> int:
    model = _load_model(args.archive)
    per, rows = _measure_rows(model, args.tau, args.head_mode)
    model_row, _ = _model_row(model, per, args)
    rows.append(model_row)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in args.format:
        _write_csv(out / "measures.csv", _MEASURE_HEADER, rows)
    if "json" in args.format:
        _write_json(out / "measures.json", {
            "archive": str(args.archive), "family": model.meta.family,
            "mode": args.mode, "tau": args.tau,
            "rows": [dict(zip(_MEASURE_HEADER, r)) for r in rows]})
    return EXIT_OK


def cmd_layers(args) -> int:
    model = _load_model(args.archive)
    _, rows = _measure_rows(model, args.tau, args.head_mode)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "layers.csv", _MEASURE_HEADER, rows)
    return EXIT_OK


def cmd_compose(args) -> int:
    model = _load_model(args.archive)
    composed = builders.composed_aggregation(
        model, policy=args.class_token, head_mode=args.head_mode)
    m = graph_measures(composed, args.tau)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "composed.csv",
               ["n_nodes", "tau", "clustering", "path_length",
                "connected_pair_fraction"],
               [[composed.n,
                 1.0 / composed.n if args.tau == "auto" else float(args.tau),
                 m.clustering, m.path_length, m.connected_pair_fraction]])
    return EXIT_OK


def cmd_compare_bnn(args) -> int:
    model = _load_model(args.archive)
    per = builders.per_layer_measures(model, args.tau, args.head_mode)
    _, query = _model_row(model, per, args)
    connectomes = []
    paths = sorted(Path(args.connectomes).glob("*.txt")) \
        + sorted(Path(args.connectomes).glob("*.edges"))
    for path in paths:
        try:
            connectomes.append(read_connectome(path))
        except ConnectomeError as e:
            print(f"warning: skipping {path}: {e}", file=sys.stderr)
    if not connectomes:
        print("error: no connectome could be parsed", file=sys.stderr)
        return EXIT_INPUT
    report = analysis.bnn_distance(query, connectomes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [[name, m.clustering, m.path_length, dist]
            for name, m, dist in report.ranked]
    _write_csv(out / "bnn_similarity.csv",
               ["name", "clustering", "path_length", "distance"], rows)
    if "svg" in args.format:
        series = [("biological", [(m.clustering, m.path_length)
                                  for _, m, _ in report.ranked])]
        svgplot.scatter_svg(out / "bnn_similarity.svg", series,
                            x_label="clustering coefficient",
                            y_label="average path length",
                            title="model vs biological networks",
                            highlight=(query.clustering, query.path_length))
    return EXIT_OK


def _read_points_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        required = {"model_id", "dataset", "measure_c", "measure_l", "accuracy"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"CSV must have columns {sorted(required)}")
        points = []
        for i, row in enumerate(reader, start=2):
            try:
                points.append(analysis.MeasurePoint(
                    model_id=row["model_id"], dataset=row["dataset"],
                    measure_c=float(row["measure_c"]),
                    measure_l=float(row["measure_l"]),
                    accuracy=float(row["accuracy"])))
            except (TypeError, ValueError) as e:
                raise ValueError(f"{path}:{i}: {e}") from None
    if not points:
        raise ValueError(f"{path}: no data rows")
    return points


def cmd_sweetspot(args) -> int:
    try:
        points = _read_points_csv(args.points)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    datasets = sorted({p.dataset for p in points})
    fit_rows, degenerate = [], False
    extrema = {"clustering": [], "path_length": []}
    curves = {"clustering": [], "path_length": []}
    for ds in datasets:
        sub = [p for p in points if p.dataset == ds]
        for measure, getter in (("clustering", lambda p: p.measure_c),
                                ("path_length", lambda p: p.measure_l)):
            xy = [(getter(p), p.accuracy) for p in sub]
            fit = analysis.fit_quadratic(xy)
            r, t = analysis.linear_correlation(xy)
            fit_rows.append([ds, measure, fit.a, fit.b, fit.c, fit.extremum_x,
                             fit.r_squared, fit.curvature_sign, r, t])
            if fit.degenerate:
                degenerate = True
            else:
                extrema[measure].append(fit.extremum_x)
            xs = np.linspace(min(x for x, _ in xy), max(x for x, _ in xy), 50)
            curves[measure].append(
                (f"{ds} fit", [(x, fit.a * x * x + fit.b * x + fit.c) for x in xs]))
    interval_rows = []
    for measure in ("clustering", "path_length"):
        ex = extrema[measure]
        if not ex:
            interval_rows.append([measure, float("nan"), float("nan"), 0])
        else:
            if len(ex) == 1:
                print(f"warning: single dataset; {measure} sweet-spot interval "
                      "is zero-width", file=sys.stderr)
            interval_rows.append([measure, min(ex), max(ex), len(ex)])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    footer = [
        "reference sweet spots from the original 21-checkpoint study:",
        "clustering in [0.839, 0.842]; path length in [1.256, 1.307]",
    ]
    _write_csv(out / "sweetspot_fits.csv",
               ["dataset", "measure", "a", "b", "c", "extremum_x", "r_squared",
                "curvature", "pearson_r", "t_statistic"], fit_rows)
    _write_csv(out / "sweetspot_intervals.csv",
               ["measure", "low", "high", "n_datasets"], interval_rows,
               footer_comments=footer)
    if "svg" in args.format:
        for measure, getter in (("clustering", lambda p: p.measure_c),
                                ("path_length", lambda p: p.measure_l)):
            series = [(ds, [(getter(p), p.accuracy)
                            for p in points if p.dataset == ds])
                      for ds in datasets]
            svgplot.scatter_svg(out / f"sweetspot_{measure}.svg", series,
                                x_label=measure, y_label="accuracy",
                                title=f"accuracy vs {measure}",
                                curves=curves[measure])
    return EXIT_DEGENERATE if degenerate else EXIT_OK


_EPOCH_RE = re.compile(r"_e(\d+)\.rga$")


def cmd_track(args) -> int:
    files = sorted(Path(args.checkpoints).glob("*.rga"))
    tagged = []
    for path in files:
        m = _EPOCH_RE.search(path.name)
        if m:
            tagged.append((int(m.group(1)), path))
    if not tagged:
        print("error: no epoch-tagged archive (*_e<N>.rga) found", file=sys.stderr)
        return EXIT_INPUT
    epochs = [e for e, _ in tagged]
    if len(set(epochs)) != len(epochs):
        print("error: duplicate epoch numbers are ambiguous", file=sys.stderr)
        return EXIT_INPUT
    tagged.sort()
    sorted_epochs = [e for e, _ in tagged]
    if sorted_epochs != list(range(sorted_epochs[0],
                                   sorted_epochs[0] + len(sorted_epochs))):
        print("warning: non-contiguous epoch numbers", file=sys.stderr)
    checkpoints = [(e, read_archive(p)) for e, p in tagged]
    rows = analysis.training_series(checkpoints, args.tau, args.tau_affine,
                                    head_mode=args.head_mode)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "trajectory.csv",
               ["epoch", "c_agg", "l_agg", "c_aff", "l_aff"],
               [[e, c1, l1, c2, l2] for e, c1, l1, c2, l2 in rows])
    if "svg" in args.format:
        svgplot.line_svg(
            out / "trajectory.svg",
            [("C aggregation", [(e, c) for e, c, _, _, _ in rows]),
             ("L aggregation", [(e, l) for e, _, l, _, _ in rows]),
             ("C affine", [(e, c) for e, _, _, c, _ in rows]),
             ("L affine", [(e, l) for e, _, _, _, l in rows])],
            x_label="epoch", y_label="measure",
            title="graph measures over training")
    return EXIT_OK


def cmd_extract(args) -> int:
    try:
        from relgraph_exporter import cli as exporter_cli
    except ImportError:
        print("error: checkpoint extraction needs the relgraph-exporter "
              "package (see exporter/ in the source tree)", file=sys.stderr)
        return EXIT_INPUT
    return exporter_cli.main(args.exporter_args)


def _add_common(p):
    p.add_argument("--tau", default="auto",
                   help="binarization threshold, or 'auto' for 1/n")
    p.add_argument("--class-token", choices=["keep", "drop", "pad"],
                   default="drop", dest="class_token")
    p.add_argument("--head-mode", choices=["whole", "per-head"],
                   default="whole", dest="head_mode")
    p.add_argument("--mode", choices=["compose", "layer-mean"], default="compose")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", default="csv",
                   type=lambda s: [t for t in s.split(",") if t],
                   help="comma-separated subset of csv,json,svg")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relgraph",
        description="Relational-graph analysis of vision-model weight archives.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", help="per-layer and model-level graph measures")
    p.add_argument("archive")
    _add_common(p)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("layers", help="per-layer graph measures only")
    p.add_argument("archive")
    _add_common(p)
    p.set_defaults(func=cmd_layers)

    p = sub.add_parser("compose", help="measures of the composed model graph")
    p.add_argument("archive")
    _add_common(p)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("compare-bnn",
                       help="rank biological networks by measure distance")
    p.add_argument("archive")
    p.add_argument("--connectomes", required=True,
                   help="directory of edge-list files")
    _add_common(p)
    p.set_defaults(func=cmd_compare_bnn)

    p = sub.add_parser("sweetspot", help="quadratic fits and sweet-spot intervals")
    p.add_argument("points", help="CSV with model_id,dataset,measure_c,"
                                  "measure_l,accuracy")
    _add_common(p)
    p.set_defaults(func=cmd_sweetspot)

    p = sub.add_parser("track", help="measure trajectory over epoch checkpoints")
    p.add_argument("checkpoints", help="directory of *_e<N>.rga archives")
    p.add_argument("--tau-affine", default="auto", dest="tau_affine")
    _add_common(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("extract",
                       help="export a checkpoint to .rga (needs relgraph-exporter)")
    p.add_argument("exporter_args", nargs=argparse.REMAINDER)
    p.set_defaults(func=cmd_extract)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "tau", "auto") != "auto":
        try:
            args.tau = float(args.tau)
        except ValueError:
            print(f"error: bad --tau value {args.tau!r}", file=sys.stderr)
            return EXIT_INPUT
    try:
        return args.func(args)
    except (ArchiveError, ConnectomeError, BuilderError, GraphError,
            analysis.InconsistentMeta, analysis.InsufficientPoints,
            analysis.RankDeficient, analysis.ConstantSeries,
            analysis.TooFewDatasets) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except analysis.DegenerateFit as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
