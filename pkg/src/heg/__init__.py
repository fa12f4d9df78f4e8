"""Temporal bipartite graph classification of multi-object video scenes.

Videos become graphs: every detected object in a sampled frame is a node,
and consecutive sampled frames are joined by complete bipartite edges in
both directions.  Two aggregation layers summarise each node's neighbours
with a bank of statistics (mean, median, std, third and fourth central
moments), a feature-gated attention head pools nodes per graph, and a
linear classifier scores the pooled embedding.
"""

from .aggregators import (DEFAULT_STD_EPSILON, KIND_ORDER, MultiAggregator,
                          agg_mean, agg_median, agg_moment, agg_std,
                          multi_aggregate, validate_kinds)
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import (DataError, DimensionError, FormatError, HegError,
                     IngestionError, NumericError)
from .estimator import HegClassifier
from .evaluation import (EvalReport, average_precision, evaluate,
                         format_report, mean_average_precision, predict)
from .features import FeatureStore, read_store, write_store
from .graph import (GraphBatch, TemporalBipartiteGraph, batch_graphs,
                    build_graph, count_stats, load_graph, neighbors,
                    save_graph)
from .layers import HegLayer, HegModel, layer_forward, model_forward
from .numerics import AdamState, adam_step, max_relative_error, xavier_init
from .pooling import (POOLING_MODES, PoolingHead, classify,
                      cross_entropy_loss, pool)
from .scene import (Detection, TubeWindow, VideoSequence, read_annotations,
                    sample_frames, tube_window, write_annotations)
from .synth import SynthSpec, generate, load_dataset, write_dataset
from .training import (TrainConfig, TrainResult, build_graphs, gradient_check,
                       init_model, train)
from .validation import check_graph, check_graphs, check_labels

__version__ = "0.1.0"

__all__ = [
    "AdamState", "DataError", "Detection", "DimensionError", "EvalReport",
    "FeatureStore", "FormatError", "GraphBatch", "HegClassifier", "HegError",
    "HegLayer", "HegModel", "IngestionError", "MultiAggregator",
    "NumericError", "PoolingHead", "SynthSpec", "TemporalBipartiteGraph",
    "TrainConfig", "TrainResult", "TubeWindow", "VideoSequence",
    "DEFAULT_STD_EPSILON", "KIND_ORDER", "POOLING_MODES",
    "adam_step", "agg_mean", "agg_median", "agg_moment", "agg_std",
    "average_precision", "batch_graphs", "build_graph", "build_graphs",
    "check_graph", "check_graphs", "check_labels", "classify",
    "count_stats", "cross_entropy_loss", "evaluate", "format_report",
    "generate", "gradient_check", "init_model", "layer_forward",
    "load_checkpoint", "load_dataset", "load_graph", "max_relative_error",
    "mean_average_precision", "model_forward", "multi_aggregate",
    "neighbors", "pool", "predict", "read_annotations", "read_store",
    "sample_frames", "save_checkpoint", "save_graph", "train",
    "tube_window", "validate_kinds", "write_annotations", "write_dataset",
    "write_store", "xavier_init", "__version__",
]
