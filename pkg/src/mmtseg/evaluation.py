"""Evaluation protocol and the classic color-clustering baseline.

Segmentations are scored by pixel accuracy under the best one-to-one
permutation between predicted and ground-truth clusters (solved as a
linear assignment on the overlap counts). The k-means baseline clusters
raw RGB vectors with Lloyd's algorithm; its cluster count is picked from
a small grid, mirroring how such baselines are usually tuned.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .alignment import overlap_matrix, solve_assignment

KMEANS_GRID = (2, 5, 8, 11, 14, 17, 20)


def optimal_pixel_accuracy(pred, gt) -> float:
    """Fraction of pixels matched under the best one-to-one label mapping."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction and ground truth differ in size: {pred.shape} vs {gt.shape}")
    mapping = solve_assignment(overlap_matrix(pred, gt))
    return mapping.score / pred.size


def kmeans_segment(image, k: int, seed: int, max_iters: int = 100):
    """Lloyd's algorithm on per-pixel RGB vectors.

    Initial centers are drawn (seeded) uniformly from the image's
    distinct colors, without replacement while possible. Iterates until
    assignments stop changing or ``max_iters`` center updates have run.
    Empty clusters keep their previous center and simply never appear in
    the output. Deterministic given the seed.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"image must be 3 x H x W, got shape {image.shape}")
    _, h, w = image.shape
    n = h * w
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"k = {k} exceeds the pixel count {n}")
    pixels = image.reshape(3, n).T
    distinct = np.unique(pixels, axis=0)
    rng = np.random.Generator(np.random.PCG64(seed))
    replace = k > distinct.shape[0]
    centers = distinct[rng.choice(distinct.shape[0], size=k, replace=replace)].copy()

    labels = _nearest_center(pixels, centers)
    for _ in range(max_iters):
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros((k, 3))
        np.add.at(sums, labels, pixels)
        occupied = counts > 0
        centers[occupied] = sums[occupied] / counts[occupied, None]
        new_labels = _nearest_center(pixels, centers)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels.reshape(h, w).astype(np.int64)


def _nearest_center(pixels, centers):
    d = ((pixels[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d.argmin(axis=1)


@dataclass
class EvalItem:
    """One evaluation image with zero or more ground-truth annotations."""

    name: str
    image: np.ndarray
    ground_truths: list = field(default_factory=list)


@dataclass
class EvalReport:
    method: str
    params: dict
    seeds: list
    per_image: dict  # image name -> list of per-seed accuracies
    mean_accuracy: float
    std_accuracy: float  # std of per-seed mean accuracies


def evaluate_method(items, segment_fn, seeds, method: str, params=None) -> EvalReport:
    """Score one method over images and seeds.

    ``segment_fn(image, seed)`` must return a label map. Images with
    several annotations are scored against each and averaged. The
    reported std is over the per-seed means (how much the method's
    overall result moves when only the seed changes).
    """
    items = [it for it in items if it.ground_truths]
    if not items:
        raise ValueError("no evaluation items with ground truth")
    per_image = {it.name: [] for it in items}
    seed_means = []
    for seed in seeds:
        accs = []
        for it in items:
            pred = segment_fn(it.image, seed)
            acc = float(np.mean([optimal_pixel_accuracy(pred, gt) for gt in it.ground_truths]))
            per_image[it.name].append(acc)
            accs.append(acc)
        seed_means.append(float(np.mean(accs)))
    # a deterministic method must report exactly zero spread
    spread = 0.0 if min(seed_means) == max(seed_means) else float(np.std(seed_means))
    return EvalReport(
        method=method,
        params=dict(params or {}),
        seeds=list(seeds),
        per_image=per_image,
        mean_accuracy=float(np.mean(seed_means)),
        std_accuracy=spread,
    )


def run_comparison(items, methods, seeds) -> list:
    """Run every method over the corpus; returns one report per method.

    ``methods`` maps a method name to ``(segment_fn, params)``. Items
    without any ground truth are skipped with a warning.
    """
    usable = []
    for it in items:
        if it.ground_truths:
            usable.append(it)
        else:
            warnings.warn(f"skipping {it.name}: no ground truth", stacklevel=2)
    if not usable:
        raise ValueError("no evaluation items with ground truth")
    return [
        evaluate_method(usable, fn, seeds, method=name, params=params)
        for name, (fn, params) in methods.items()
    ]


def best_kmeans_report(reports):
    """The best-scoring k across a grid of k-means reports (ties: first)."""
    kmeans = [r for r in reports if r.method.startswith("kmeans")]
    if not kmeans:
        raise ValueError("no k-means reports to choose from")
    return max(kmeans, key=lambda r: r.mean_accuracy)


def format_report_table(reports) -> str:
    header = f"{'method':<24}{'mean_acc':>10}{'std':>10}  params"
    lines = [header, "-" * len(header)]
    for r in reports:
        params = " ".join(f"{k}={v}" for k, v in sorted(r.params.items()))
        lines.append(f"{r.method:<24}{r.mean_accuracy:>10.4f}{r.std_accuracy:>10.4f}  {params}")
    return "\n".join(lines)


def report_records(reports) -> list:
    """Machine-readable lines: method, image, seed, accuracy."""
    out = []
    for r in reports:
        for name, accs in sorted(r.per_image.items()):
            for seed, acc in zip(r.seeds, accs):
                out.append(f"{r.method}\t{name}\t{seed}\t{acc:.6f}")
    return out
