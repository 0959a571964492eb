"""Unit tests for the evaluation protocol and the k-means baseline."""

import numpy as np
import pytest

from mmtseg.evaluation import (
    EvalItem,
    best_kmeans_report,
    evaluate_method,
    format_report_table,
    kmeans_segment,
    optimal_pixel_accuracy,
    report_records,
    run_comparison,
)
from oracles import brute_force_max_agreement, reference_lloyd


class TestOptimalPixelAccuracy:
    def test_equal_maps(self, rng):
        m = rng.integers(0, 4, size=(6, 6))
        assert optimal_pixel_accuracy(m, m) == 1.0

    def test_renamed_labels_still_perfect(self, rng):
        m = rng.integers(0, 4, size=(6, 6))
        renamed = (m * 7 + 3) % 11  # injective on {0..3}
        assert optimal_pixel_accuracy(renamed, m) == 1.0

    def test_matches_brute_force_bijection_max(self, rng):
        for _ in range(20):
            pred = rng.integers(0, 5, size=(8, 8))
            gt = rng.integers(0, 4, size=(8, 8))
            want = brute_force_max_agreement(gt, pred) / 64.0
            assert optimal_pixel_accuracy(pred, gt) == pytest.approx(want, abs=1e-12)

    def test_at_least_raw_agreement(self, rng):
        for _ in range(10):
            pred = rng.integers(0, 6, size=(7, 7))
            gt = rng.integers(0, 6, size=(7, 7))
            raw = (pred == gt).mean()
            assert optimal_pixel_accuracy(pred, gt) >= raw - 1e-12

    def test_bijection_invariance(self, rng):
        pred = rng.integers(0, 4, size=(6, 6))
        gt = rng.integers(0, 3, size=(6, 6))
        base = optimal_pixel_accuracy(pred, gt)
        assert optimal_pixel_accuracy((pred + 5) % 9, gt) == pytest.approx(base, abs=1e-12)
        assert optimal_pixel_accuracy(pred, (gt * 3 + 1) % 7) == pytest.approx(base, abs=1e-12)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            optimal_pixel_accuracy(np.zeros((2, 2), dtype=int), np.zeros((2, 3), dtype=int))


class TestKmeansSegment:
    def test_single_cluster(self, rng):
        img = rng.random(size=(3, 5, 5))
        labels = kmeans_segment(img, 1, seed=0)
        assert (labels == 0).all()

    def test_two_color_image_separates_perfectly(self):
        img = np.zeros((3, 8, 8))
        img[0, :, :4] = 1.0
        img[2, :, 4:] = 1.0
        gt = (np.arange(8) >= 4)[None, :] * np.ones((8, 1), dtype=np.int64)
        labels = kmeans_segment(img, 2, seed=1)
        assert optimal_pixel_accuracy(labels, gt.astype(np.int64)) == 1.0

    def test_matches_reference_lloyd(self, rng):
        img = rng.random(size=(3, 16, 16))
        for seed in (0, 3):
            mine = kmeans_segment(img, 4, seed=seed)
            ref = reference_lloyd(img, 4, seed=seed)
            assert np.array_equal(mine, ref)

    def test_deterministic(self, rng):
        img = rng.random(size=(3, 10, 10))
        a = kmeans_segment(img, 5, seed=9)
        b = kmeans_segment(img, 5, seed=9)
        assert np.array_equal(a, b)

    def test_objective_non_increasing(self, rng):
        img = rng.random(size=(3, 12, 12))
        pixels = img.reshape(3, -1).T
        distinct = np.unique(pixels, axis=0)
        gen = np.random.Generator(np.random.PCG64(4))
        centers = distinct[gen.choice(distinct.shape[0], size=5, replace=False)].copy()

        def objective(labels, centers):
            return float(((pixels - centers[labels]) ** 2).sum())

        labels = ((pixels[:, None, :] - centers[None]) ** 2).sum(2).argmin(1)
        values = [objective(labels, centers)]
        for _ in range(8):
            for j in range(5):
                members = pixels[labels == j]
                if len(members):
                    centers[j] = members.mean(0)
            labels = ((pixels[:, None, :] - centers[None]) ** 2).sum(2).argmin(1)
            values.append(objective(labels, centers))
        assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))

    def test_k_above_distinct_colors(self):
        img = np.zeros((3, 4, 4))
        img[0, :, 2:] = 1.0  # two distinct colors
        labels = kmeans_segment(img, 5, seed=0)
        assert np.unique(labels).size <= 2  # empty clusters dropped from the alphabet

    def test_invalid_k(self, rng):
        img = rng.random(size=(3, 4, 4))
        with pytest.raises(ValueError):
            kmeans_segment(img, 0, seed=0)
        with pytest.raises(ValueError):
            kmeans_segment(img, 17, seed=0)


def _items(rng, n=2):
    items = []
    for i in range(n):
        img = rng.random(size=(3, 6, 6))
        gt = rng.integers(0, 3, size=(6, 6))
        items.append(EvalItem(name=f"img{i}", image=img, ground_truths=[gt]))
    return items


class TestRunComparison:
    def test_identity_oracle_scores_one(self, rng):
        items = _items(rng)
        gt_by_name = {it.name: it.ground_truths[0] for it in items}
        calls = iter(items)

        def oracle(image, seed):
            for it in items:
                if it.image is image:
                    return gt_by_name[it.name]
            raise AssertionError("unknown image")

        report = evaluate_method(items, oracle, seeds=[0], method="identity")
        assert report.mean_accuracy == 1.0

    def test_deterministic_method_zero_std(self, rng):
        items = _items(rng)

        def constant(image, seed):
            return np.zeros(image.shape[1:], dtype=np.int64)

        report = evaluate_method(items, constant, seeds=[0, 1, 2], method="const")
        assert report.std_accuracy == 0.0

    def test_mean_is_hand_average(self, rng):
        items = _items(rng, n=3)

        def noisy(image, seed):
            gen = np.random.default_rng(seed + int(image.sum() * 1000) % 997)
            return gen.integers(0, 3, size=image.shape[1:])

        report = evaluate_method(items, noisy, seeds=[0, 5], method="noisy")
        per_seed = []
        for si in range(2):
            per_seed.append(np.mean([report.per_image[f"img{i}"][si] for i in range(3)]))
        assert report.mean_accuracy == pytest.approx(float(np.mean(per_seed)), abs=1e-12)
        assert report.std_accuracy == pytest.approx(float(np.std(per_seed)), abs=1e-12)

    def test_images_without_gt_skipped_with_warning(self, rng):
        items = _items(rng) + [EvalItem(name="nogt", image=rng.random(size=(3, 4, 4)))]

        def constant(image, seed):
            return np.zeros(image.shape[1:], dtype=np.int64)

        with pytest.warns(UserWarning, match="nogt"):
            reports = run_comparison(items, {"const": (constant, {})}, seeds=[0])
        assert "nogt" not in reports[0].per_image

    def test_all_without_gt_rejected(self, rng):
        items = [EvalItem(name="a", image=rng.random(size=(3, 4, 4)))]
        with pytest.raises(ValueError):
            run_comparison(items, {}, seeds=[0])

    def test_best_kmeans_and_formatting(self, rng):
        items = _items(rng)
        methods = {
            f"kmeans-k{k}": (lambda image, seed, k=k: kmeans_segment(image, k, seed), {"k": k})
            for k in (2, 3)
        }
        reports = run_comparison(items, methods, seeds=[0, 1])
        best = best_kmeans_report(reports)
        assert best.mean_accuracy == max(r.mean_accuracy for r in reports)
        table = format_report_table(reports)
        assert "kmeans-k2" in table and "mean_acc" in table
        records = report_records(reports)
        assert len(records) == 2 * 2 * 2  # methods x images x seeds
        assert all(len(r.split("\t")) == 4 for r in records)
