"""Optimal one-to-one assignment of tracks to detections.

Maximizes total affinity with the Hungarian algorithm (shortest augmenting
path / potentials formulation), then demotes any optimal pair whose affinity
still falls below the association threshold. The solver is hand-rolled so the
scan order, and therefore tie-breaking, is fixed: rows are processed in
index order and equal reduced costs resolve to the lowest column index.
"""

from dataclasses import dataclass

import numpy as np

from .affinity import AffinityMatrix


@dataclass(frozen=True)
class Assignment:
    """Partition of track and detection indices after association."""

    matches: tuple[tuple[int, int, float], ...]
    unmatched_tracks: tuple[int, ...]
    unmatched_detections: tuple[int, ...]


def _solve_min(cost: np.ndarray) -> list[int]:
    """Column assigned to each row of a (n <= m) cost matrix, minimizing total."""
    n, m = cost.shape
    INF = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    assigned_row = [0] * (m + 1)  # 1-based row occupying each column, 0 = free
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        assigned_row[0] = i
        j0 = 0
        minv = [INF] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = assigned_row[j0]
            delta = INF
            j1 = -1
            row = cost[i0 - 1]
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[assigned_row[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if assigned_row[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            assigned_row[j0] = assigned_row[j1]
            j0 = j1
    out = [-1] * n
    for j in range(1, m + 1):
        if assigned_row[j]:
            out[assigned_row[j] - 1] = j - 1
    return out


def hungarian_max(values) -> list[tuple[int, int]]:
    """Max-total-affinity one-to-one matching; the surplus side stays unmatched.

    Returns (row, col) pairs sorted by row. The smaller side is matched
    completely, which is optimal for nonnegative affinities.
    """
    mat = np.asarray(values, dtype=float)
    if mat.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {mat.shape}")
    n, m = mat.shape
    if n == 0 or m == 0:
        return []
    if not np.all(np.isfinite(mat)):
        raise ValueError("affinity matrix contains non-finite values")
    transposed = n > m
    work = mat.T if transposed else mat
    cost = float(work.max()) - work
    cols = _solve_min(cost)
    pairs = [(i, j) for i, j in enumerate(cols) if j >= 0]
    if transposed:
        pairs = [(j, i) for i, j in pairs]
    return sorted(pairs)


def associate(matrix: AffinityMatrix, tau_asc: float) -> Assignment:
    """Assign optimally, then drop pairs whose affinity is below ``tau_asc``.

    The threshold runs after optimization: a demoted pair frees both its track
    and its detection rather than letting either grab a worse partner.
    """
    pairs = hungarian_max(matrix.values)
    matches = []
    matched_tracks = set()
    matched_dets = set()
    for i, j in pairs:
        value = float(matrix.values[i, j])
        if value < tau_asc:
            continue
        matches.append((i, j, value))
        matched_tracks.add(i)
        matched_dets.add(j)
    return Assignment(
        matches=tuple(matches),
        unmatched_tracks=tuple(i for i in range(matrix.rows) if i not in matched_tracks),
        unmatched_detections=tuple(j for j in range(matrix.cols) if j not in matched_dets),
    )
