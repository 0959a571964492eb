"""Dense-tensor kernel for the segmentation networks.

Everything the three-layer extractor needs, forward and backward:
2-D convolution (same padding), ReLU, per-channel normalization,
channel softmax, SGD with momentum, and a finite-difference gradient
checker. All arrays are float64 and operations are deterministic.

Convolutions are computed as one GEMM per kernel offset on the
flattened zero-padded image ("shift-and-GEMM"). This avoids the
im2col copy entirely: with zero padding, a flat offset of
``du * padded_width + dv`` addresses exactly the 2-D neighbor
``(du, dv)`` for every valid output position, and the junk computed
at padding positions is cropped afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Raised when tensor shapes are inconsistent with an operation."""


@dataclass
class ParamTensor:
    """A learnable tensor with its gradient and momentum buffer.

    The three arrays always share one shape. ``grad`` accumulates
    across backward calls until the optimizer step clears it.
    """

    value: np.ndarray
    grad: np.ndarray = field(default=None)  # type: ignore[assignment]
    momentum: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.momentum is None:
            self.momentum = np.zeros_like(self.value)
        if self.grad.shape != self.value.shape or self.momentum.shape != self.value.shape:
            raise ShapeError(
                f"ParamTensor buffers must share one shape, got value {self.value.shape}, "
                f"grad {self.grad.shape}, momentum {self.momentum.shape}"
            )

    def zero_grad(self):
        self.grad.fill(0.0)

    def copy(self) -> "ParamTensor":
        return ParamTensor(self.value.copy(), self.grad.copy(), self.momentum.copy())


def _check_conv_shapes(x, w, b, padding):
    if x.ndim != 3:
        raise ShapeError(f"conv2d input must be C_in x H x W, got shape {x.shape}")
    if w.ndim != 4:
        raise ShapeError(f"conv2d kernels must be C_out x C_in x k x k, got shape {w.shape}")
    c_out, c_in, kh, kw = w.shape
    if kh != kw:
        raise ShapeError(f"conv2d kernels must be square, got {kh}x{kw}")
    if kh % 2 == 0:
        raise ShapeError(f"conv2d kernel size must be odd, got {kh}")
    if x.shape[0] != c_in:
        raise ShapeError(f"conv2d input has {x.shape[0]} channels but kernels expect {c_in}")
    if b.shape != (c_out,):
        raise ShapeError(f"conv2d bias must have shape ({c_out},), got {b.shape}")
    if padding != (kh - 1) // 2:
        raise ShapeError(
            f"conv2d padding must be (k-1)//2 = {(kh - 1) // 2} to preserve size, got {padding}"
        )


def _pad_flat(x, p):
    """Zero-pad spatially and return (flat_view, padded_height, padded_width)."""
    c, h, w = x.shape
    hp, wp = h + 2 * p, w + 2 * p
    if p == 0:
        return np.ascontiguousarray(x).reshape(c, hp * wp), hp, wp
    xp = np.zeros((c, hp, wp), dtype=np.float64)
    xp[:, p : p + h, p : p + w] = x
    return xp.reshape(c, hp * wp), hp, wp


def conv2d(x: np.ndarray, kernels: ParamTensor, bias: ParamTensor, padding: int) -> np.ndarray:
    """Same-size 2-D cross-correlation with zero padding.

    ``out[o,i,j] = bias[o] + sum_{c,u,v} kernels[o,c,u,v] * padded[c,i+u,j+v]``
    """
    x = np.asarray(x, dtype=np.float64)
    w, b = kernels.value, bias.value
    _check_conv_shapes(x, w, b, padding)
    _, h, width = x.shape
    c_out, _, k, _ = w.shape
    p = padding

    xf, hp, wp = _pad_flat(x, p)
    base = p * wp + p
    strip = (h - 1) * wp + width
    # contiguous (k, k, C_out, C_in) so each per-offset GEMM hits BLAS
    wk = np.ascontiguousarray(w.transpose(2, 3, 0, 1))
    acc = np.zeros((c_out, strip), dtype=np.float64)
    for u in range(k):
        for v in range(k):
            off = (u - p) * wp + (v - p)
            acc += wk[u, v] @ xf[:, base + off : base + off + strip]
    out = np.lib.stride_tricks.as_strided(
        acc, shape=(c_out, h, width), strides=(acc.strides[0], wp * acc.strides[1], acc.strides[1])
    )
    return out + b[:, None, None]


def conv2d_backward(
    grad_out: np.ndarray,
    x: np.ndarray,
    kernels: ParamTensor,
    bias: ParamTensor,
    padding: int,
    need_grad_input: bool = True,
):
    """Exact gradients for :func:`conv2d`.

    Accumulates into ``kernels.grad`` and ``bias.grad``; returns the
    gradient w.r.t. the input (or None when ``need_grad_input`` is False,
    which skips the most expensive GEMMs for the first layer).
    """
    x = np.asarray(x, dtype=np.float64)
    w = kernels.value
    _check_conv_shapes(x, w, bias.value, padding)
    c_in, h, width = x.shape
    c_out, _, k, _ = w.shape
    if grad_out.shape != (c_out, h, width):
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match output ({c_out},{h},{width})")
    p = padding

    bias.grad += grad_out.sum(axis=(1, 2))

    xf, hp, wp = _pad_flat(x, p)
    gf, _, _ = _pad_flat(grad_out, p)
    n = hp * wp
    gw = np.empty((c_out, c_in, k, k), dtype=np.float64)
    for u in range(k):
        for v in range(k):
            off = (u - p) * wp + (v - p)
            lo, hi = max(0, -off), n - max(0, off)
            gw[:, :, u, v] = gf[:, lo:hi] @ xf[:, lo + off : hi + off].T
    kernels.grad += gw

    if not need_grad_input:
        return None
    wk = np.ascontiguousarray(w.transpose(2, 3, 1, 0))  # (k, k, C_in, C_out)
    gxf = np.zeros((c_in, n), dtype=np.float64)
    for u in range(k):
        for v in range(k):
            off = (u - p) * wp + (v - p)
            lo, hi = max(0, off), n + min(0, off)
            gxf[:, lo:hi] += wk[u, v] @ gf[:, lo - off : hi - off]
    gx = gxf.reshape(c_in, hp, wp)[:, p : p + h, p : p + width]
    return np.ascontiguousarray(gx)


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Upstream gradient masked by x > 0 (subgradient 0 at x = 0)."""
    return np.where(x > 0.0, grad_out, 0.0)


def channel_norm(
    x: np.ndarray, gamma: ParamTensor, beta: ParamTensor, eps: float = 1e-5
) -> np.ndarray:
    """Per-channel normalization over spatial positions, with affine terms."""
    out, _ = channel_norm_forward(x, gamma, beta, eps)
    return out


def channel_norm_forward(x, gamma: ParamTensor, beta: ParamTensor, eps: float = 1e-5):
    """Like :func:`channel_norm` but also returns the cache for backward.

    Statistics are population mean/variance over each channel's H*W
    positions (training uses a single image, so this is the whole
    "batch" for that channel).
    """
    x = np.asarray(x, dtype=np.float64)
    if eps <= 0.0:
        raise ValueError(f"channel_norm eps must be > 0, got {eps}")
    if x.ndim != 3:
        raise ShapeError(f"channel_norm input must be C x H x W, got shape {x.shape}")
    c = x.shape[0]
    if gamma.value.shape != (c,) or beta.value.shape != (c,):
        raise ShapeError(
            f"channel_norm affine terms must have shape ({c},), got gamma {gamma.value.shape}, "
            f"beta {beta.value.shape}"
        )
    n = x.shape[1] * x.shape[2]
    mean = x.mean(axis=(1, 2), keepdims=True)
    centered = x - mean
    var = np.einsum("cij,cij->c", centered, centered)[:, None, None] / n
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_std
    out = gamma.value[:, None, None] * x_hat + beta.value[:, None, None]
    return out, (x_hat, inv_std)


def channel_norm_backward(grad_out, cache, gamma: ParamTensor, beta: ParamTensor):
    """Analytic backward for :func:`channel_norm_forward`.

    Accumulates into ``gamma.grad``/``beta.grad`` and returns grad w.r.t. x.
    """
    x_hat, inv_std = cache
    n = grad_out.shape[1] * grad_out.shape[2]
    gamma.grad += np.einsum("cij,cij->c", grad_out, x_hat)
    beta.grad += grad_out.sum(axis=(1, 2))
    g_hat = grad_out * gamma.value[:, None, None]
    mean_g = g_hat.mean(axis=(1, 2), keepdims=True)
    mean_gx = np.einsum("cij,cij->c", g_hat, x_hat)[:, None, None] / n
    return inv_std * (g_hat - mean_g - x_hat * mean_gx)


def softmax_channels(x: np.ndarray) -> np.ndarray:
    """Per-pixel softmax over the channel axis, stabilized by max subtraction."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"softmax_channels input must be q x H x W, got shape {x.shape}")
    shifted = x - x.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def sgd_momentum_step(params, lr: float, momentum: float):
    """In-place SGD-with-momentum update over a collection of ParamTensors.

    v <- momentum * v + g;  theta <- theta - lr * v;  gradients cleared.
    Plain gradient descent when momentum = 0.
    """
    if lr < 0.0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must be in [0, 1), got {momentum}")
    for p in params:
        p.momentum *= momentum
        p.momentum += p.grad
        p.value -= lr * p.momentum
        p.zero_grad()


def finite_diff_check(fn, point: np.ndarray, analytic: np.ndarray, h: float = 1e-5) -> float:
    """Central-difference check of an analytic gradient.

    ``fn`` maps a tensor to a scalar; ``analytic`` is the claimed gradient
    at ``point``. Returns the max over coordinates of
    ``|a - n| / max(1, |a|, |n|)``.
    """
    if h <= 0.0:
        raise ValueError(f"step size must be > 0, got {h}")
    point = np.asarray(point, dtype=np.float64)
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != point.shape:
        raise ShapeError(f"analytic gradient shape {analytic.shape} != point shape {point.shape}")
    flat = point.ravel().copy()
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = float(fn(flat.reshape(point.shape)))
        flat[i] = orig - h
        f_minus = float(fn(flat.reshape(point.shape)))
        flat[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise ValueError("function returned a non-finite value during finite differencing")
        numeric = (f_plus - f_minus) / (2.0 * h)
        a = analytic.ravel()[i]
        err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
        worst = max(worst, err)
    return worst
