"""Cluster-label alignment between two label maps.

Two networks trained from different initializations name their clusters
arbitrarily, so one map's labels must be rewritten into the other's
alphabet before they can supervise each other. Alignment maximizes the
total number of pixels on which the two maps agree:

    max  sum_ij s_ij * d_ij   s.t.  each row/col of d used at most once,

where ``s_ij`` counts pixels carrying label i in one map and j in the
other. The program is solved exactly with the Hungarian method on the
zero-padded square matrix; ties between optimal matchings are broken by
the lexicographically smallest mapping so runs are reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

_INT = np.int64


@dataclass
class OverlapMatrix:
    """Co-occurrence counts between the distinct labels of two maps.

    ``counts[i, j]`` is the number of pixels labeled ``rows[i]`` in map A
    and ``cols[j]`` in map B. Row/col alphabets are sorted ascending.
    """

    rows: np.ndarray
    cols: np.ndarray
    counts: np.ndarray


@dataclass
class LabelMapping:
    """Injective relabeling from one map's alphabet into the other's.

    ``pairs`` lists (source label, target label) with sources ascending;
    sources are the column alphabet of the overlap matrix the mapping was
    solved from (map B), targets the row alphabet (map A). Sources the
    solver could not match to a real target get fresh labels outside the
    target alphabet (smallest unused non-negative integers, in source
    order). ``score`` is the total overlap of the matched real pairs.
    """

    pairs: list
    source_side: str
    score: int

    def as_dict(self) -> dict:
        return {s: t for s, t in self.pairs}


def _check_label_map(labels, name):
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.size == 0:
        raise ValueError(f"{name} must be a non-empty H x W array, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError(f"{name} must be integer-typed, got dtype {labels.dtype}")
    if labels.min() < 0:
        raise ValueError(f"{name} contains negative labels")
    return labels.astype(_INT, copy=False)


def overlap_matrix(map_a, map_b) -> OverlapMatrix:
    """Exact co-occurrence counts over all pixels of two same-size maps."""
    a = _check_label_map(map_a, "map_a")
    b = _check_label_map(map_b, "map_b")
    if a.shape != b.shape:
        raise ValueError(f"label maps differ in size: {a.shape} vs {b.shape}")
    rows, ia = np.unique(a, return_inverse=True)
    cols, ib = np.unique(b, return_inverse=True)
    flat = ia.ravel() * cols.size + ib.ravel()
    counts = np.bincount(flat, minlength=rows.size * cols.size).reshape(rows.size, cols.size)
    return OverlapMatrix(rows=rows, cols=cols, counts=counts.astype(_INT))


def _hungarian_square(cost):
    """Exact min-cost assignment on a square integer matrix.

    Classic O(n^3) shortest-augmenting-path formulation with potentials.
    Returns (row_to_col, u, v) where the duals satisfy
    ``u[i] + v[j] <= cost[i, j]`` with equality on every edge used by any
    optimal assignment (complementary slackness), which is what the
    tie-breaking pass needs.
    """
    n = cost.shape[0]
    big = np.iinfo(_INT).max // 4
    u = np.zeros(n, dtype=_INT)
    v = np.zeros(n + 1, dtype=_INT)  # index n is the virtual start column
    col_row = np.full(n + 1, -1, dtype=_INT)
    for i in range(n):
        col_row[n] = i
        j0 = n
        min_red = np.full(n, big, dtype=_INT)
        way = np.full(n, n, dtype=_INT)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = col_row[j0]
            reduced = cost[i0] - u[i0] - v[:n]
            free = ~used[:n]
            better = free & (reduced < min_red)
            min_red[better] = reduced[better]
            way[better] = j0
            masked = np.where(free, min_red, big)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            used_cols = np.flatnonzero(used)
            u[col_row[used_cols]] += delta
            v[used_cols] -= delta
            min_red[free] -= delta
            j0 = j1
            if col_row[j0] < 0:
                break
        while j0 != n:
            j1 = way[j0]
            col_row[j0] = col_row[j1]
            j0 = j1
    row_to_col = np.empty(n, dtype=_INT)
    row_to_col[col_row[:n]] = np.arange(n)
    return row_to_col, u, v[:n]


def _augment_through(tight, row_col, col_row, avail, start_row, target_col, banned_col):
    """Alternating-path search used while pinning ties.

    Tries to reroute ``start_row`` (which is about to lose its column) to
    ``target_col`` (about to become free) through tight edges over the
    still-available columns, excluding ``banned_col``. Applies the
    augmentation and returns True on success.
    """
    n = tight.shape[0]
    parent = np.full(n, -1, dtype=_INT)
    seen = np.zeros(n, dtype=bool)
    seen[banned_col] = True
    frontier = [start_row]
    found = False
    while frontier and not found:
        nxt = []
        for r in frontier:
            cols = np.flatnonzero(tight[r] & avail & ~seen)
            for c in cols:
                seen[c] = True
                parent[c] = r
                if c == target_col:
                    found = True
                    break
                nxt.append(col_row[c])
            if found:
                break
        frontier = nxt
    if not found:
        return False
    c = target_col
    while True:
        r = parent[c]
        prev = row_col[r]
        row_col[r] = c
        col_row[c] = r
        if r == start_row:
            break
        c = prev
    return True


def _lex_smallest_assignment(cost, u, v, row_to_col):
    """Among all optimal assignments, pick the lexicographically smallest.

    All optimal assignments are exactly the perfect matchings of the
    "tight" subgraph (edges with zero reduced cost under the optimal
    duals). Rows are fixed greedily in order; a candidate column is kept
    if the remaining tight graph still has a perfect matching, checked by
    an alternating-path search.
    """
    n = cost.shape[0]
    tight = (u[:, None] + v[None, :]) == cost
    row_col = row_to_col.copy()
    col_row = np.empty(n, dtype=_INT)
    col_row[row_col] = np.arange(n)
    avail = np.ones(n, dtype=bool)
    out = np.empty(n, dtype=_INT)
    for i in range(n):
        current = row_col[i]
        chosen = -1
        for j in np.flatnonzero(tight[i] & avail):
            if j == current:
                chosen = j
                break
            if _augment_through(tight, row_col, col_row, avail, col_row[j], current, j):
                row_col[i] = j
                col_row[j] = i
                chosen = j
                break
        if chosen < 0:  # matched edge is always tight, so this cannot happen
            raise AssertionError("tight graph lost its perfect matching")
        out[i] = chosen
        avail[chosen] = False
    return out


def _fresh_labels(taken, count):
    """The ``count`` smallest non-negative integers outside ``taken``."""
    taken = set(int(t) for t in taken)
    out = []
    candidate = 0
    while len(out) < count:
        if candidate not in taken:
            out.append(candidate)
        candidate += 1
    return out


def _build_mapping(sources, targets, counts_src_tgt, assign):
    n_tgt = targets.size
    fresh = iter(_fresh_labels(targets, max(0, sources.size - n_tgt)))
    pairs = []
    score = 0
    for si in range(sources.size):
        j = int(assign[si])
        if j < n_tgt:
            pairs.append((int(sources[si]), int(targets[j])))
            score += int(counts_src_tgt[si, j])
        else:
            pairs.append((int(sources[si]), next(fresh)))
    return LabelMapping(pairs=pairs, source_side="cols", score=score)


def solve_assignment(matrix: OverlapMatrix) -> LabelMapping:
    """Maximum-total-overlap one-to-one matching of the two alphabets.

    Rectangular matrices are zero-padded to square internally. The
    returned mapping rewrites map B's labels (matrix columns) into map
    A's alphabet (matrix rows); its score equals the true maximum.
    """
    counts = np.asarray(matrix.counts, dtype=_INT)
    if counts.size == 0:
        raise ValueError("overlap matrix is empty")
    if (counts < 0).any():
        raise ValueError("overlap counts must be non-negative")
    sources = np.asarray(matrix.cols)
    targets = np.asarray(matrix.rows)
    s = counts.T  # sources as rows so lexicographic order follows source labels
    n = max(s.shape)
    square = np.zeros((n, n), dtype=_INT)
    square[: s.shape[0], : s.shape[1]] = s
    cost = -square
    row_to_col, u, v = _hungarian_square(cost)
    assign = _lex_smallest_assignment(cost, u, v, row_to_col)
    return _build_mapping(sources, targets, s, assign)


def brute_force_assignment(matrix: OverlapMatrix) -> LabelMapping:
    """Exhaustive-enumeration twin of :func:`solve_assignment`.

    Kept as an independent oracle: enumerates every injective matching of
    the smaller side and applies the same lexicographic tie-break. Guarded
    to small alphabets because of the factorial blow-up.
    """
    counts = np.asarray(matrix.counts, dtype=_INT)
    if counts.size == 0:
        raise ValueError("overlap matrix is empty")
    if min(counts.shape) > 8:
        raise ValueError(f"brute force limited to min side <= 8, got {counts.shape}")
    sources = np.asarray(matrix.cols)
    targets = np.asarray(matrix.rows)
    s = counts.T
    n_src, n_tgt = s.shape
    src_idx = np.arange(n_src)
    best_score = -1
    best_vec = None
    if n_src <= n_tgt:
        for perm in itertools.permutations(range(n_tgt), n_src):
            score = int(s[src_idx, list(perm)].sum())
            if score > best_score:  # permutations arrive in lexicographic order
                best_score = score
                best_vec = np.array(perm, dtype=_INT)
    else:
        for perm in itertools.permutations(range(n_src), n_tgt):
            score = int(s[list(perm), np.arange(n_tgt)].sum())
            vec = np.full(n_src, n_tgt, dtype=_INT)  # n_tgt marks "fresh label"
            vec[list(perm)] = np.arange(n_tgt)
            if score > best_score or (score == best_score and tuple(vec) < tuple(best_vec)):
                best_score = score
                best_vec = vec
    return _build_mapping(sources, targets, s, best_vec)


def apply_mapping(labels, mapping: LabelMapping):
    """Pure per-pixel relabeling; every map label must appear as a source."""
    labels = _check_label_map(labels, "labels")
    lut_size = int(labels.max()) + 1
    lut = np.full(lut_size, -1, dtype=_INT)
    for src, tgt in mapping.pairs:
        if src < lut_size:
            lut[src] = tgt
    out = lut[labels]
    if (out < 0).any():
        missing = sorted(set(np.unique(labels)) - {s for s, _ in mapping.pairs})
        raise ValueError(f"labels {missing} have no entry in the mapping")
    return out
