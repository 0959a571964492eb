"""Alternating mutual mean-teacher training on a single image.

Two identically-structured networks start from different seeds. Each
iteration, network 1 trains one gradient step against pseudo-labels from
network 2's temporally-averaged (EMA) copy, aligned into network 1's own
label space; then network 2 does the same against network 1's freshly
updated mean model. Steps are sequential: a step always reads the other
network's latest mean parameters. After every gradient step the
learner's mean model moves by

    theta_mean <- alpha * theta_mean + (1 - alpha) * theta.

A plain self-training variant (one network supervising itself with its
own argmax labels, no mean models) is kept as the instability baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .alignment import apply_mapping, overlap_matrix, solve_assignment
from .losses import sim_loss, tv_loss
from .network import (
    ModelParams,
    NetworkConfig,
    assign_labels,
    count_labels,
    forward,
    forward_with_cache,
    backward,
    init_params,
)
from .ops import sgd_momentum_step

OUTPUT_MODELS = ("model1", "model2", "mean1", "mean2")


def _step_gradient(sim, tv, features_shape, tv_weight):
    """Gradient driving one SGD step.

    Loss values are reported as sums over pixels/elements, but the fixed
    learning rate and TV weight are calibrated for the usual mean
    reductions (cross-entropy averaged over pixels, total variation
    averaged over feature elements), so the step gradient is normalized
    accordingly. Otherwise the effective step size would grow with image
    size and channel count.
    """
    q, h, w = features_shape
    return sim.grad / (h * w) + (tv_weight / (q * h * w)) * tv.grad


@dataclass
class TrainerConfig:
    iterations: int = 1000
    learning_rate: float = 0.1
    momentum: float = 0.9
    ema_alpha: float = 0.999
    tv_weight: float = 5.0
    seed1: int = 0
    seed2: int = 1
    network: NetworkConfig = field(default_factory=NetworkConfig)
    output_model: str = "mean1"
    abort_on_collapse: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if not 0.0 <= self.ema_alpha < 1.0:
            raise ValueError(f"ema_alpha must be in [0, 1), got {self.ema_alpha}")
        if self.tv_weight < 0.0:
            raise ValueError(f"tv_weight must be >= 0, got {self.tv_weight}")
        if self.output_model not in OUTPUT_MODELS:
            raise ValueError(f"output_model must be one of {OUTPUT_MODELS}, got {self.output_model!r}")


@dataclass
class StepMetrics:
    iteration: int
    network: int
    sim_loss: float
    tv_loss: float
    total_loss: float
    cluster_count: int
    teacher_cluster_count: int
    degenerate_teacher: bool


@dataclass
class TrainerState:
    """Both networks plus their mean models; mean params start equal to
    the live params and are only ever touched by the EMA update."""

    params1: ModelParams
    params2: ModelParams
    mean1: ModelParams
    mean2: ModelParams
    iteration: int = 1
    metrics: list = field(default_factory=list)


@dataclass
class TrainResult:
    labels: np.ndarray
    metrics: list
    collapsed: bool
    state: TrainerState


def init_state(config: TrainerConfig) -> TrainerState:
    params1 = init_params(config.network, config.seed1)
    params2 = init_params(config.network, config.seed2)
    return TrainerState(params1=params1, params2=params2,
                        mean1=params1.copy(), mean2=params2.copy())


def ema_update(mean: ModelParams, current: ModelParams, alpha: float):
    """In-place convex combination of parameter values; buffers untouched."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    mean_tensors = mean.tensors()
    current_tensors = current.tensors()
    if len(mean_tensors) != len(current_tensors):
        raise ValueError("mean and current models have different parameter counts")
    for m, c in zip(mean_tensors, current_tensors):
        if m.value.shape != c.value.shape:
            raise ValueError(f"parameter shape mismatch: {m.value.shape} vs {c.value.shape}")
        m.value *= alpha
        m.value += (1.0 - alpha) * c.value


def train_step(state: TrainerState, learner: int, image, config: TrainerConfig):
    """One gradient step for one network against the other's mean model.

    Only the learner's parameters and its mean model change; the teacher
    pair is read-only and no gradient flows into it. Pseudo-targets are
    the teacher's argmax labels rewritten into the learner's current
    label space. Returns (metrics, learner's pre-update label map).
    """
    if learner not in (1, 2):
        raise ValueError(f"learner must be 1 or 2, got {learner}")
    params = state.params1 if learner == 1 else state.params2
    mean = state.mean1 if learner == 1 else state.mean2
    teacher = state.mean2 if learner == 1 else state.mean1

    features, caches = forward_with_cache(params, image)
    own_labels = assign_labels(features)
    teacher_labels = assign_labels(forward(teacher, image))
    teacher_clusters = count_labels(teacher_labels)

    mapping = solve_assignment(overlap_matrix(own_labels, teacher_labels))
    targets = apply_mapping(teacher_labels, mapping)

    sim = sim_loss(features, targets)
    tv = tv_loss(features)
    total = sim.value + config.tv_weight * tv.value
    backward(params, caches, _step_gradient(sim, tv, features.shape, config.tv_weight))
    sgd_momentum_step(params.tensors(), config.learning_rate, config.momentum)
    ema_update(mean, params, config.ema_alpha)

    metrics = StepMetrics(
        iteration=state.iteration,
        network=learner,
        sim_loss=sim.value,
        tv_loss=tv.value,
        total_loss=total,
        cluster_count=count_labels(own_labels),
        teacher_cluster_count=teacher_clusters,
        degenerate_teacher=teacher_clusters == 1,
    )
    return metrics, own_labels


def output_labels(state: TrainerState, image, which: str):
    if which not in OUTPUT_MODELS:
        raise ValueError(f"unknown output model {which!r}")
    params = {"model1": state.params1, "model2": state.params2,
              "mean1": state.mean1, "mean2": state.mean2}[which]
    return assign_labels(forward(params, image))


def train(image, config: TrainerConfig) -> TrainResult:
    """Run the full alternating loop and extract the final segmentation.

    Iterations are counted like the update equations: the state at t=1 is
    the initialization, and t = 2..iterations each perform one full round
    (a step for network 1, then one for network 2). If both networks'
    own label maps collapse to a single cluster the loop aborts early,
    returning the collapsed labels with the ``collapsed`` flag set.
    """
    state = init_state(config)
    collapsed = False
    labels = None
    for t in range(2, config.iterations + 1):
        state.iteration = t
        m1, labels1 = train_step(state, 1, image, config)
        m2, _ = train_step(state, 2, image, config)
        state.metrics.extend([m1, m2])
        if config.abort_on_collapse and m1.cluster_count == 1 and m2.cluster_count == 1:
            collapsed = True
            labels = labels1
            break
    if labels is None:
        labels = output_labels(state, image, config.output_model)
    return TrainResult(labels=labels, metrics=state.metrics, collapsed=collapsed, state=state)


def self_train(image, config: TrainerConfig) -> TrainResult:
    """Single-network ablation: self-training on the network's own argmax.

    Uses ``seed1`` only; no peer network, no mean models, no alignment
    (targets are already in the network's own label space). The final
    segmentation comes from the live network.
    """
    params = init_params(config.network, config.seed1)
    state = TrainerState(params1=params, params2=params, mean1=params, mean2=params)
    collapsed = False
    labels = None
    for t in range(2, config.iterations + 1):
        state.iteration = t
        features, caches = forward_with_cache(params, image)
        own_labels = assign_labels(features)
        clusters = count_labels(own_labels)
        sim = sim_loss(features, own_labels)
        tv = tv_loss(features)
        backward(params, caches, _step_gradient(sim, tv, features.shape, config.tv_weight))
        sgd_momentum_step(params.tensors(), config.learning_rate, config.momentum)
        state.metrics.append(StepMetrics(
            iteration=t, network=1,
            sim_loss=sim.value, tv_loss=tv.value,
            total_loss=sim.value + config.tv_weight * tv.value,
            cluster_count=clusters, teacher_cluster_count=clusters,
            degenerate_teacher=clusters == 1,
        ))
        if config.abort_on_collapse and clusters == 1:
            collapsed = True
            labels = own_labels
            break
    if labels is None:
        labels = assign_labels(forward(params, image))
    return TrainResult(labels=labels, metrics=state.metrics, collapsed=collapsed, state=state)


def metrics_lines(metrics) -> list:
    """Line-delimited record per step: iter, net, L_sim, L_tv, L_total, clusters."""
    return [
        f"{m.iteration}\t{m.network}\t{m.sim_loss:.17g}\t{m.tv_loss:.17g}"
        f"\t{m.total_loss:.17g}\t{m.cluster_count}"
        for m in metrics
    ]
