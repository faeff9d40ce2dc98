"""Relational-graph analysis of vision-model weight archives.

Converts the weight tensors of the five supported model families (ViT,
DeiT, Swin, Mixer, MetaFormer) into weighted token/channel graphs,
computes small-world measures on their binarized forms, fits sweet-spot
regressions against task accuracy, and ranks similarity to biological
networks.
"""

from .archive import (ModelArchive, ModelMeta, TensorRecord, ValidatedModel,
                      read_archive, validate_archive, write_archive)
from .builders import (CanonicalAggregation, LayerAggregation, affine_graph,
                       canonicalize, compose_layers, composed_aggregation,
                       concatenated_aggregation, downsample, layer_affine,
                       layer_aggregation, metaformer_aggregation,
                       mixer_aggregation, per_layer_measures,
                       swin_aggregation, swin_window_assignment, upsample,
                       vit_aggregation)
from .connectome import ConnectomeGraph, read_connectome, write_connectome
from .graph import (BinaryGraph, DenseGraph, GraphMeasures,
                    average_path_length, clustering_coefficient,
                    diagonal_concat, graph_measures, row_normalize_scaled,
                    threshold_binarize)
from .analysis import (BnnSimilarityReport, MeasurePoint, QuadraticFit,
                       SweetSpot, bnn_distance, fit_quadratic,
                       linear_correlation, sweet_spot, training_series)

__version__ = "0.1.0"
