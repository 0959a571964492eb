"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np


def check_image(X) -> np.ndarray:
    """Coerce an image array to the canonical 3 x H x W float64 layout.

    Accepts channel-first (3, H, W), channel-last (H, W, 3) or grayscale
    (H, W). Integer inputs are assumed 8-bit and scaled by 1/255; float
    inputs must already lie in [0, 1]. Values must be finite.
    """
    X = np.asarray(X)
    if X.ndim == 2:
        X = np.repeat(X[None, :, :], 3, axis=0)
    elif X.ndim == 3:
        if X.shape[0] == 3:
            pass
        elif X.shape[-1] == 3:
            X = X.transpose(2, 0, 1)
        else:
            raise ValueError(
                f"image must be (3, H, W), (H, W, 3) or (H, W), got shape {X.shape}"
            )
    else:
        raise ValueError(f"image must be 2-D or 3-D, got shape {X.shape}")
    if X.shape[1] < 1 or X.shape[2] < 1:
        raise ValueError(f"image has a zero dimension: {X.shape}")
    if np.issubdtype(X.dtype, np.integer):
        X = X.astype(np.float64) / 255.0
    else:
        X = X.astype(np.float64)
    if not np.isfinite(X).all():
        raise ValueError("image contains non-finite values")
    if X.min() < 0.0 or X.max() > 1.0:
        raise ValueError(
            f"float image values must lie in [0, 1], got range [{X.min()}, {X.max()}]"
        )
    return X


def check_label_map(labels) -> np.ndarray:
    """Validate an H x W map of non-negative integer labels."""
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.size == 0:
        raise ValueError(f"label map must be a non-empty H x W array, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError(f"label map must be integer-typed, got dtype {labels.dtype}")
    if labels.min() < 0:
        raise ValueError("label map contains negative labels")
    return labels.astype(np.int64, copy=False)
