"""Sweet-spot regression, linear-correlation reporting, similarity
ranking against biological networks, and training-trajectory assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .archive import ModelArchive, validate_archive
from .builders import concatenated_aggregation, layer_affine
from .connectome import ConnectomeGraph
from .graph import GraphMeasures, graph_measures

# Reference values reported for 21 pretrained checkpoints: stable
# sweet spots C in [0.839, 0.842] and L in [1.256, 1.307], and the
# training-tracking thresholds 1/192 (affine) and 1/197 (aggregation).
# Kept as documented constants, not test targets.
REFERENCE_SWEET_SPOT_CLUSTERING = (0.839, 0.842)
REFERENCE_SWEET_SPOT_PATH_LENGTH = (1.256, 1.307)
REFERENCE_TAU_AGGREGATION = 1.0 / 197.0
REFERENCE_TAU_AFFINE = 1.0 / 192.0


class AnalysisError(ValueError):
    pass


class InsufficientPoints(AnalysisError):
    pass


class RankDeficient(AnalysisError):
    pass


class DegenerateFit(AnalysisError):
    pass


class TooFewDatasets(AnalysisError):
    pass


class ConstantSeries(AnalysisError):
    pass


class InconsistentMeta(AnalysisError):
    pass


@dataclass(frozen=True)
class MeasurePoint:
    model_id: str
    measure_c: float
    measure_l: float
    accuracy: float
    dataset: str
    params_millions: float | None = None


@dataclass(frozen=True)
class QuadraticFit:
    """y = a x^2 + b x + c with the extremum location and fit quality."""

    a: float
    b: float
    c: float
    extremum_x: float
    r_squared: float
    curvature_sign: str  # min | max | degenerate

    @property
    def degenerate(self) -> bool:
        return self.curvature_sign == "degenerate"


@dataclass(frozen=True)
class SweetSpot:
    measure_name: str
    interval: tuple[float, float]
    datasets_used: list[str]


@dataclass(frozen=True)
class BnnSimilarityReport:
    query: GraphMeasures
    ranked: list[tuple[str, GraphMeasures, float]]


def fit_quadratic(points) -> QuadraticFit:
    """Degree-2 least squares with internal standardization of x.

    Raw measure ranges (e.g. clustering in [0.83, 0.85]) make the plain
    Vandermonde system ill-conditioned, so x is centered and scaled to
    unit variance before solving and the coefficients are mapped back.
    """
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise InsufficientPoints(f"need >= 3 points, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if len(np.unique(x)) < 3:
        raise RankDeficient("need >= 3 distinct x values")
    mu, sigma = x.mean(), x.std()
    z = (x - mu) / sigma
    design = np.column_stack([z * z, z, np.ones_like(z)])
    coeffs, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 3:
        raise RankDeficient("design matrix is rank deficient")
    az, bz, cz = coeffs
    # map y = az z^2 + bz z + cz back to raw x
    a = az / sigma**2
    b = bz / sigma - 2 * az * mu / sigma**2
    c = cz - bz * mu / sigma + az * mu**2 / sigma**2
    resid = y - design @ coeffs
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float((resid**2).sum()) / ss_tot)
    spread = x.max() - x.min()
    y_spread = max(y.max() - y.min(), 1.0)
    if abs(a) * spread**2 < 1e-12 * y_spread:
        return QuadraticFit(a=a, b=b, c=c, extremum_x=float("nan"),
                            r_squared=r_squared, curvature_sign="degenerate")
    sign = "min" if a > 0 else "max"
    return QuadraticFit(a=a, b=b, c=c, extremum_x=-b / (2 * a),
                        r_squared=r_squared, curvature_sign=sign)


def sweet_spot(fits, measure_name: str, datasets=None) -> SweetSpot:
    """Span of per-dataset extremum locations."""
    fits = list(fits)
    if len(fits) < 2:
        raise TooFewDatasets("sweet spot needs fits from >= 2 datasets")
    if any(f.degenerate for f in fits):
        raise DegenerateFit("cannot place a sweet spot from a degenerate fit")
    extrema = [f.extremum_x for f in fits]
    return SweetSpot(measure_name=measure_name,
                     interval=(min(extrema), max(extrema)),
                     datasets_used=list(datasets) if datasets else [])


def linear_correlation(points) -> tuple[float, float]:
    """Sample Pearson r and its t statistic r sqrt((n-2)/(1-r^2))."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise InsufficientPoints(f"need >= 3 points, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ConstantSeries("x and y must both be non-constant")
    r = float(np.corrcoef(x, y)[0, 1])
    n = len(pts)
    if abs(r) >= 1.0:
        t = math.copysign(float("inf"), r)
    else:
        t = r * math.sqrt((n - 2) / (1 - r * r))
    return (r, t)


def bnn_distance(query: GraphMeasures, connectomes) -> BnnSimilarityReport:
    """Rank biological networks by Euclidean distance in (C, L) space.

    Connectome measures come from the binarized undirected graph (any
    positive weight is an edge).  Ties break by name.
    """
    entries = []
    for conn in connectomes:
        if conn.n < 2:
            raise AnalysisError(f"connectome {conn.name!r} has fewer than 2 nodes")
        m = conn.measures()
        d = math.hypot(query.clustering - m.clustering,
                       query.path_length - m.path_length)
        entries.append((conn.name, m, d))
    entries.sort(key=lambda e: (e[2], e[0]))
    return BnnSimilarityReport(query=query, ranked=entries)


def training_series(checkpoints, tau_agg="auto", tau_aff="auto",
                    head_mode: str = "whole"):
    """Measure trajectory over an epoch-ordered list of checkpoints.

    Per checkpoint, all layer aggregation graphs are concatenated along
    the diagonal and measured at tau 1/n_tokens; affine measures are
    computed per layer at tau 1/embed_dim and averaged.  Returns rows
    (epoch, C_agg, L_agg, C_aff, L_aff).
    """
    rows = []
    ref_meta = None
    for epoch, archive in checkpoints:
        if not isinstance(archive, ModelArchive):
            raise AnalysisError("training_series expects (epoch, ModelArchive) pairs")
        meta_dict = archive.meta.to_dict()
        if ref_meta is None:
            ref_meta = meta_dict
        elif meta_dict != ref_meta:
            raise InconsistentMeta(f"checkpoint at epoch {epoch} has different metadata")
        model = validate_archive(archive)
        t_agg = 1.0 / model.meta.n_tokens(0) if tau_agg == "auto" else float(tau_agg)
        concat = concatenated_aggregation(model, head_mode)
        m_agg = graph_measures(concat, t_agg)
        aff = []
        for layer in range(model.meta.depth):
            stage = model.meta.stage_of_layer(layer)
            t_aff = (1.0 / model.meta.embed_dims[stage]
                     if tau_aff == "auto" else float(tau_aff))
            aff.append(graph_measures(layer_affine(model, layer), t_aff))
        c_aff = float(np.mean([m.clustering for m in aff]))
        l_aff = float(np.mean([m.path_length for m in aff]))
        rows.append((epoch, m_agg.clustering, m_agg.path_length, c_aff, l_aff))
    return rows
