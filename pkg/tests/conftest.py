import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def two_region_image(size=64):
    """Left half pure red, right half pure blue."""
    img = np.zeros((3, size, size))
    img[0, :, : size // 2] = 1.0
    img[2, :, size // 2 :] = 1.0
    return img


def two_region_gt(size=64):
    gt = np.zeros((size, size), dtype=np.int64)
    gt[:, size // 2 :] = 1
    return gt


def three_region_image(size=96, noise=0.0, seed=0):
    """Three vertical color bands, optionally with seeded pixel noise."""
    img = np.zeros((3, size, size))
    third = size // 3
    img[0, :, :third] = 0.9
    img[1, :, third : 2 * third] = 0.9
    img[2, :, 2 * third :] = 0.9
    if noise > 0.0:
        noise_rng = np.random.default_rng(seed)
        img = np.clip(img + noise_rng.normal(0.0, noise, size=img.shape), 0.0, 1.0)
    return img


def three_region_gt(size=96):
    gt = np.zeros((size, size), dtype=np.int64)
    third = size // 3
    gt[:, third : 2 * third] = 1
    gt[:, 2 * third :] = 2
    return gt
