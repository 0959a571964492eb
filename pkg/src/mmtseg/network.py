"""Feature-extraction network and argmax labeling.

The extractor stacks ``n_layers`` blocks of (3x3 conv, ReLU,
per-channel norm) — the first block maps RGB to ``n_channels``, later
blocks keep the width — followed by a 1x1 projection plus a final
normalization. Per-pixel cluster labels are the argmax over the
output channels. No pooling or striding: labels need full resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ops import (
    ParamTensor,
    ShapeError,
    channel_norm_backward,
    channel_norm_forward,
    conv2d,
    conv2d_backward,
    relu,
    relu_backward,
)


@dataclass(frozen=True)
class NetworkConfig:
    n_layers: int = 3
    n_channels: int = 100
    kernel_size: int = 3
    norm_eps: float = 1e-5

    def __post_init__(self):
        if self.n_layers < 1:
            raise ValueError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.n_channels < 2:
            raise ValueError(f"n_channels must be >= 2, got {self.n_channels}")
        if self.kernel_size % 2 == 0 or self.kernel_size < 1:
            raise ValueError(f"kernel_size must be odd and positive, got {self.kernel_size}")
        if self.norm_eps <= 0.0:
            raise ValueError(f"norm_eps must be > 0, got {self.norm_eps}")


@dataclass
class ConvBlockParams:
    """One conv + norm unit: kernel, bias and the norm's affine terms."""

    kernel: ParamTensor
    bias: ParamTensor
    gamma: ParamTensor
    beta: ParamTensor

    def tensors(self):
        return [self.kernel, self.bias, self.gamma, self.beta]

    def copy(self) -> "ConvBlockParams":
        return ConvBlockParams(*(t.copy() for t in self.tensors()))


@dataclass
class ModelParams:
    """All learnable parameters of one extractor network."""

    config: NetworkConfig
    blocks: list = field(default_factory=list)  # n_layers ConvBlockParams
    head: ConvBlockParams = None  # type: ignore[assignment]  # 1x1 projection + norm

    def tensors(self):
        out = []
        for b in self.blocks:
            out.extend(b.tensors())
        out.extend(self.head.tensors())
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, [b.copy() for b in self.blocks], self.head.copy())

    def values_vector(self) -> np.ndarray:
        """All parameter values flattened into one vector (for diagnostics/tests)."""
        return np.concatenate([t.value.ravel() for t in self.tensors()])


def _init_block(rng, c_in, c_out, k):
    fan_in = c_in * k * k
    kernel = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(c_out, c_in, k, k))
    return ConvBlockParams(
        kernel=ParamTensor(kernel),
        bias=ParamTensor(np.zeros(c_out)),
        gamma=ParamTensor(np.ones(c_out)),
        beta=ParamTensor(np.zeros(c_out)),
    )


def init_params(config: NetworkConfig, seed: int) -> ModelParams:
    """Seeded parameter initialization.

    Kernels are zero-mean normal with std 1/sqrt(fan_in); biases and
    norm shifts start at zero, norm scales at one. The same seed gives
    bit-identical parameters.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    k, q = config.kernel_size, config.n_channels
    blocks = []
    c_in = 3
    for _ in range(config.n_layers):
        blocks.append(_init_block(rng, c_in, q, k))
        c_in = q
    head = _init_block(rng, q, q, 1)
    return ModelParams(config=config, blocks=blocks, head=head)


def _check_image(image):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ShapeError(f"network input must be 3 x H x W, got shape {image.shape}")
    if not np.isfinite(image).all():
        raise ValueError("network input contains non-finite values")
    return image


def forward(params: ModelParams, image: np.ndarray) -> np.ndarray:
    """Response map q x H x W for one image. Deterministic given params."""
    features, _ = forward_with_cache(params, image, keep_cache=False)
    return features


def forward_with_cache(params: ModelParams, image: np.ndarray, keep_cache: bool = True):
    """Forward pass that optionally records what backward needs.

    Returns ``(features, caches)``; ``caches`` is None when
    ``keep_cache`` is False (teacher passes never backpropagate).
    """
    x = _check_image(image)
    cfg = params.config
    pad = (cfg.kernel_size - 1) // 2
    caches = [] if keep_cache else None
    for block in params.blocks:
        conv_in = x
        z = conv2d(conv_in, block.kernel, block.bias, pad)
        a = relu(z)
        x, norm_cache = channel_norm_forward(a, block.gamma, block.beta, cfg.norm_eps)
        if keep_cache:
            caches.append((conv_in, z, norm_cache))
    head_in = x
    z = conv2d(head_in, params.head.kernel, params.head.bias, 0)
    out, norm_cache = channel_norm_forward(z, params.head.gamma, params.head.beta, cfg.norm_eps)
    if keep_cache:
        caches.append((head_in, None, norm_cache))
    return out, caches


def backward(params: ModelParams, caches, grad_features: np.ndarray):
    """Accumulate parameter gradients from a gradient on the response map."""
    cfg = params.config
    pad = (cfg.kernel_size - 1) // 2
    head_in, _, norm_cache = caches[-1]
    g = channel_norm_backward(grad_features, norm_cache, params.head.gamma, params.head.beta)
    g = conv2d_backward(g, head_in, params.head.kernel, params.head.bias, 0)
    for i in range(len(params.blocks) - 1, -1, -1):
        block = params.blocks[i]
        conv_in, z, norm_cache = caches[i]
        g = channel_norm_backward(g, norm_cache, block.gamma, block.beta)
        g = relu_backward(g, z)
        # the image itself needs no gradient
        g = conv2d_backward(g, conv_in, block.kernel, block.bias, pad, need_grad_input=i > 0)


def assign_labels(features: np.ndarray) -> np.ndarray:
    """Per-pixel cluster label = index of the maximal channel.

    Ties go to the lowest channel index, so labeling is deterministic.
    """
    features = np.asarray(features)
    if features.ndim != 3 or features.shape[0] < 2:
        raise ShapeError(f"features must be q x H x W with q >= 2, got shape {features.shape}")
    return features.argmax(axis=0).astype(np.int64)


def count_labels(labels: np.ndarray) -> int:
    return int(np.unique(labels).size)
