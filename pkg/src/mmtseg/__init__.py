"""Unsupervised image segmentation with mutual mean-teacher training.

Two seeded convolutional feature extractors label every pixel by channel
argmax and train each other through EMA-averaged pseudo-labels, aligned
across the networks by an exact Hungarian matching on cluster-overlap
counts, under a cross-entropy + total-variation objective.
"""

from .alignment import (
    LabelMapping,
    OverlapMatrix,
    apply_mapping,
    brute_force_assignment,
    overlap_matrix,
    solve_assignment,
)
from .estimators import KMeansSegmenter, MutualMeanTeacherSegmenter, SelfTrainingSegmenter
from .evaluation import (
    EvalItem,
    EvalReport,
    KMEANS_GRID,
    best_kmeans_report,
    evaluate_method,
    kmeans_segment,
    optimal_pixel_accuracy,
    run_comparison,
)
from .image_io import (
    ImageFormatError,
    load_image,
    read_label_raw,
    read_manifest,
    save_image_png,
    save_image_ppm,
    write_label_png,
    write_label_raw,
)
from .losses import LossValue, sim_loss, total_loss, tv_loss
from .network import (
    ModelParams,
    NetworkConfig,
    assign_labels,
    count_labels,
    forward,
    init_params,
)
from .ops import (
    ParamTensor,
    ShapeError,
    channel_norm,
    conv2d,
    finite_diff_check,
    relu,
    sgd_momentum_step,
    softmax_channels,
)
from .trainer import (
    TrainerConfig,
    TrainerState,
    TrainResult,
    StepMetrics,
    ema_update,
    init_state,
    metrics_lines,
    self_train,
    train,
    train_step,
)
from .validation import check_image, check_label_map

__version__ = "0.1.0"

__all__ = [
    "KMEANS_GRID",
    "EvalItem",
    "EvalReport",
    "ImageFormatError",
    "KMeansSegmenter",
    "LabelMapping",
    "LossValue",
    "ModelParams",
    "MutualMeanTeacherSegmenter",
    "NetworkConfig",
    "OverlapMatrix",
    "ParamTensor",
    "SelfTrainingSegmenter",
    "ShapeError",
    "StepMetrics",
    "TrainResult",
    "TrainerConfig",
    "TrainerState",
    "apply_mapping",
    "assign_labels",
    "best_kmeans_report",
    "brute_force_assignment",
    "channel_norm",
    "check_image",
    "check_label_map",
    "conv2d",
    "count_labels",
    "ema_update",
    "evaluate_method",
    "finite_diff_check",
    "forward",
    "init_params",
    "init_state",
    "kmeans_segment",
    "load_image",
    "metrics_lines",
    "optimal_pixel_accuracy",
    "overlap_matrix",
    "read_label_raw",
    "read_manifest",
    "relu",
    "run_comparison",
    "save_image_png",
    "save_image_ppm",
    "self_train",
    "sgd_momentum_step",
    "sim_loss",
    "softmax_channels",
    "solve_assignment",
    "total_loss",
    "train",
    "train_step",
    "tv_loss",
    "write_label_png",
    "write_label_raw",
]
