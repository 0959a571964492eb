"""Training objectives on the response map.

Two terms: an L1 total-variation penalty on spatially adjacent feature
vectors (pushes neighboring pixels toward the same cluster) and a
cross-entropy term against aligned pseudo-labels (pulls each pixel's
channel distribution toward its target cluster). Both return the loss
value together with the exact gradient w.r.t. the feature map, so the
network backward pass can start from their sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ops import ShapeError, softmax_channels


@dataclass
class LossValue:
    value: float
    grad: np.ndarray


def _check_features(features):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3:
        raise ShapeError(f"features must be q x H x W, got shape {features.shape}")
    return features


def tv_loss(features) -> LossValue:
    """L1 norm of horizontal and vertical neighbor differences.

    Sums |y[c,i+1,j] - y[c,i,j]| and |y[c,i,j+1] - y[c,i,j]| over every
    valid neighbor pair of every channel. The subgradient at exactly-zero
    differences is 0.
    """
    f = _check_features(features)
    _, h, w = f.shape
    if h < 2 or w < 2:
        raise ShapeError(f"tv_loss needs at least 2x2 spatial extent, got {h}x{w}")
    d_down = f[:, 1:, :] - f[:, :-1, :]
    d_right = f[:, :, 1:] - f[:, :, :-1]
    value = np.abs(d_down).sum() + np.abs(d_right).sum()
    grad = np.zeros_like(f)
    s = np.sign(d_down)
    grad[:, 1:, :] += s
    grad[:, :-1, :] -= s
    s = np.sign(d_right)
    grad[:, :, 1:] += s
    grad[:, :, :-1] -= s
    return LossValue(float(value), grad)


def sim_loss(features, targets) -> LossValue:
    """Softmax cross-entropy of the feature map against a target label map.

    Softmax over channels is applied internally; the value is
    ``sum_n -ln p[target(n), n]`` and the gradient w.r.t. the raw
    features is the usual ``p - onehot``.
    """
    f = _check_features(features)
    q, h, w = f.shape
    targets = np.asarray(targets)
    if targets.shape != (h, w):
        raise ShapeError(f"targets shape {targets.shape} does not match spatial size ({h},{w})")
    if not np.issubdtype(targets.dtype, np.integer):
        raise ValueError(f"targets must be integer labels, got dtype {targets.dtype}")
    if targets.min() < 0 or targets.max() >= q:
        raise ValueError(f"target labels must lie in [0, {q}), got range "
                         f"[{targets.min()}, {targets.max()}]")
    flat = f.reshape(q, h * w)
    t = targets.ravel()
    m = flat.max(axis=0)
    log_norm = m + np.log(np.exp(flat - m).sum(axis=0))
    value = (log_norm - flat[t, np.arange(t.size)]).sum()
    grad = softmax_channels(f).reshape(q, h * w)
    grad[t, np.arange(t.size)] -= 1.0
    return LossValue(float(value), grad.reshape(q, h, w))


def total_loss(features, targets, beta: float) -> LossValue:
    """Weighted objective: cross-entropy plus ``beta`` times total variation."""
    if beta < 0.0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    sim = sim_loss(features, targets)
    tv = tv_loss(features)
    return LossValue(sim.value + beta * tv.value, sim.grad + beta * tv.grad)
