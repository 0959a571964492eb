"""Unit and property tests for overlap counting and label alignment."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmtseg.alignment import (
    LabelMapping,
    OverlapMatrix,
    apply_mapping,
    brute_force_assignment,
    overlap_matrix,
    solve_assignment,
)
from oracles import brute_force_max_agreement, naive_overlap_counts


def _matrix(counts, rows=None, cols=None):
    counts = np.asarray(counts, dtype=np.int64)
    if rows is None:
        rows = np.arange(counts.shape[0])
    if cols is None:
        cols = np.arange(counts.shape[1])
    return OverlapMatrix(rows=np.asarray(rows), cols=np.asarray(cols), counts=counts)


class TestOverlapMatrix:
    def test_identical_maps(self):
        m = np.array([[0, 0], [1, 1]])
        om = overlap_matrix(m, m)
        assert np.array_equal(om.rows, [0, 1])
        assert np.array_equal(om.cols, [0, 1])
        assert np.array_equal(om.counts, [[2, 0], [0, 2]])

    def test_swapped_maps(self):
        a = np.array([[0, 0, 1, 1]])
        b = np.array([[1, 1, 0, 0]])
        om = overlap_matrix(a, b)
        assert np.array_equal(om.counts, [[0, 2], [2, 0]])

    def test_matches_nested_loop_counter(self, rng):
        a = rng.integers(0, 6, size=(16, 16))
        b = rng.integers(0, 5, size=(16, 16))
        om = overlap_matrix(a, b)
        rows, cols, counts = naive_overlap_counts(a, b)
        assert list(om.rows) == rows
        assert list(om.cols) == cols
        assert np.array_equal(om.counts, counts)

    def test_total_is_pixel_count(self, rng):
        a = rng.integers(0, 7, size=(9, 13))
        b = rng.integers(0, 3, size=(9, 13))
        assert overlap_matrix(a, b).counts.sum() == a.size

    def test_transpose_symmetry(self, rng):
        a = rng.integers(0, 4, size=(8, 8))
        b = rng.integers(0, 6, size=(8, 8))
        ab = overlap_matrix(a, b)
        ba = overlap_matrix(b, a)
        assert np.array_equal(ab.counts, ba.counts.T)
        assert np.array_equal(ab.rows, ba.cols)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            overlap_matrix(np.zeros((2, 2), dtype=int), np.zeros((2, 3), dtype=int))

    def test_alphabets_are_present_labels(self):
        a = np.array([[5, 5], [9, 9]])
        b = np.array([[2, 4], [2, 4]])
        om = overlap_matrix(a, b)
        assert list(om.rows) == [5, 9]
        assert list(om.cols) == [2, 4]


class TestSolveAssignment:
    def test_identity_diagonal(self):
        m = _matrix(np.eye(3, dtype=np.int64))
        got = solve_assignment(m)
        assert got.pairs == [(0, 0), (1, 1), (2, 2)]
        assert got.score == 3

    def test_swap(self):
        got = solve_assignment(_matrix([[0, 2], [2, 0]]))
        assert got.pairs == [(0, 1), (1, 0)]
        assert got.score == 4

    def test_random_6x6_against_brute_force(self, rng):
        for _ in range(100):
            counts = rng.integers(0, 51, size=(6, 6))
            m = _matrix(counts)
            assert solve_assignment(m).score == brute_force_assignment(m).score

    def test_rectangular_against_brute_force(self, rng):
        for _ in range(200):
            nr = int(rng.integers(1, 7))
            nc = int(rng.integers(1, 7))
            m = _matrix(rng.integers(0, 9, size=(nr, nc)))
            got = solve_assignment(m)
            want = brute_force_assignment(m)
            assert got.score == want.score
            assert got.pairs == want.pairs

    def test_tie_break_is_lexicographic(self):
        # every matching scores 2; smallest source must take smallest target
        got = solve_assignment(_matrix([[1, 1], [1, 1]]))
        assert got.pairs == [(0, 0), (1, 1)]

    def test_tie_heavy_against_brute_force(self, rng):
        for _ in range(200):
            nr = int(rng.integers(1, 6))
            nc = int(rng.integers(1, 6))
            m = _matrix(rng.integers(0, 2, size=(nr, nc)))
            assert solve_assignment(m).pairs == brute_force_assignment(m).pairs

    def test_unmatched_sources_get_fresh_labels(self):
        # three sources, one target: two sources spill outside {4}
        m = _matrix([[3, 1, 2]], rows=[4], cols=[0, 1, 2])
        got = solve_assignment(m)
        assert dict(got.pairs)[0] == 4
        fresh = [t for s, t in got.pairs if s != 0]
        assert fresh == [0, 1]  # smallest integers outside the target alphabet
        assert got.score == 3

    def test_score_beats_random_matchings(self, rng):
        counts = rng.integers(0, 100, size=(8, 8))
        best = solve_assignment(_matrix(counts)).score
        for _ in range(1000):
            perm = rng.permutation(8)
            assert counts[perm, np.arange(8)].sum() <= best

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            solve_assignment(_matrix(np.zeros((0, 0), dtype=np.int64)))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            solve_assignment(_matrix([[-1]]))

    @given(st.integers(0, 2 ** 31), st.integers(1, 5), st.integers(1, 5))
    @settings(max_examples=60, deadline=None)
    def test_property_matches_brute_force(self, seed, nr, nc):
        counts = np.random.default_rng(seed).integers(0, 6, size=(nr, nc))
        m = _matrix(counts)
        got = solve_assignment(m)
        want = brute_force_assignment(m)
        assert got.score == want.score
        assert got.pairs == want.pairs


class TestBruteForce:
    def test_single_cell(self):
        got = brute_force_assignment(_matrix([[5]], rows=[3], cols=[8]))
        assert got.pairs == [(8, 3)]
        assert got.score == 5

    def test_exhaustive_2x2_sweep(self):
        import itertools

        for vals in itertools.product(range(3), repeat=4):
            m = _matrix(np.array(vals).reshape(2, 2))
            got = solve_assignment(m)
            want = brute_force_assignment(m)
            assert got.pairs == want.pairs
            assert got.score == want.score

    def test_diagonally_dominant_is_identity(self):
        counts = np.full((4, 4), 1, dtype=np.int64) + 10 * np.eye(4, dtype=np.int64)
        got = brute_force_assignment(_matrix(counts))
        assert got.pairs == [(i, i) for i in range(4)]

    def test_size_guard(self):
        with pytest.raises(ValueError):
            brute_force_assignment(_matrix(np.ones((9, 9), dtype=np.int64)))


class TestApplyMapping:
    def test_identity(self):
        m = np.array([[0, 1], [1, 0]])
        mapping = LabelMapping(pairs=[(0, 0), (1, 1)], source_side="cols", score=0)
        assert np.array_equal(apply_mapping(m, mapping), m)

    def test_swap(self):
        m = np.array([[0, 0, 1]])
        mapping = LabelMapping(pairs=[(0, 1), (1, 0)], source_side="cols", score=0)
        assert np.array_equal(apply_mapping(m, mapping), [[1, 1, 0]])

    def test_missing_label_rejected(self):
        mapping = LabelMapping(pairs=[(0, 1)], source_side="cols", score=0)
        with pytest.raises(ValueError):
            apply_mapping(np.array([[0, 2]]), mapping)

    def test_distinct_count_preserved(self, rng):
        m = rng.integers(0, 5, size=(6, 6))
        mapping = LabelMapping(pairs=[(i, 10 + i) for i in range(5)], source_side="cols", score=0)
        out = apply_mapping(m, mapping)
        assert np.unique(out).size == np.unique(m).size

    def test_alignment_achieves_brute_force_agreement(self, rng):
        for _ in range(25):
            a = rng.integers(0, 5, size=(6, 6))
            b = rng.integers(0, 4, size=(6, 6))
            mapping = solve_assignment(overlap_matrix(a, b))
            aligned = apply_mapping(b, mapping)
            agreement = int((aligned == a).sum())
            assert agreement == brute_force_max_agreement(a, b)
            assert agreement == mapping.score

    def test_relabeling_preserves_cooccurrence_multiset(self, rng):
        a = rng.integers(0, 4, size=(7, 7))
        b = rng.integers(0, 5, size=(7, 7))
        mapping = solve_assignment(overlap_matrix(a, b))
        before = sorted(overlap_matrix(a, b).counts.ravel())
        after = sorted(overlap_matrix(a, apply_mapping(b, mapping)).counts.ravel())
        assert before == after


class TestSelfAlignment:
    def test_identity_mapping_and_max_score(self, rng):
        m = rng.integers(0, 6, size=(10, 10))
        mapping = solve_assignment(overlap_matrix(m, m))
        present = sorted(int(v) for v in np.unique(m))
        assert mapping.pairs == [(v, v) for v in present]
        assert mapping.score == m.size
