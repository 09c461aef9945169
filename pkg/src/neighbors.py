"""
Exact k-nearest-neighbor search and the two per-point neighborhood statistics:
the normalized nearest-neighbor distance rho and the pairwise angles between
centered neighbor vectors.
"""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.neighbors import NearestNeighbors

from src import config
from src.errors import (
    DataError,
    DegenerateGeometryError,
    DuplicatePointsError,
    ParameterError,
)

# Get logger for this module
logger = logging.getLogger(__name__)

MIN_POINTS = 3


def _read_only(array):
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """N points in D ambient dimensions; every entry finite and N >= 3."""

    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64, copy=True)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2:
            raise DataError(f"Data must be a 2-D matrix, got shape {points.shape}")
        if points.shape[0] < MIN_POINTS:
            raise DataError(f"At least {MIN_POINTS} points are required, got {points.shape[0]}")
        if points.shape[1] < 1:
            raise DataError("Data must have at least one column")
        bad = ~np.isfinite(points)
        if bad.any():
            row = int(np.argwhere(bad)[0][0])
            raise DataError(f"Non-finite value in row {row}")
        object.__setattr__(self, 'points', _read_only(points))

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def ambient_dim(self):
        return self.points.shape[1]

    def deduplicated(self):
        """
        Return a copy without repeated rows (first occurrence kept, order preserved).
        """
        _, first = np.unique(self.points, axis=0, return_index=True)
        keep = np.sort(first)
        removed = self.n_points - keep.size
        if removed:
            logger.warning(f"Removed {removed} duplicate rows out of {self.n_points}")
        return DataMatrix(self.points[keep])


@dataclass(frozen=True, eq=False)
class NeighborhoodIndex:
    """
    The k+1 nearest neighbors of every point, self excluded, sorted by ascending
    distance with ties broken by ascending point index.
    """

    k: int
    neighbor_ids: np.ndarray
    distances: np.ndarray

    @property
    def n_points(self):
        return self.neighbor_ids.shape[0]


def _sorted_row(points, i, candidates):
    dist = np.sqrt(((points[candidates] - points[i]) ** 2).sum(axis=1))
    order = np.lexsort((candidates, dist))
    return candidates[order], dist[order]


def _brute_force_row(points, i, k):
    others = np.delete(np.arange(points.shape[0]), i)
    ids, dist = _sorted_row(points, i, others)
    return ids[:k + 1], dist[:k + 1]


def build_index(data, k, brute_force_dim=None):
    """
    Exact Euclidean (k+1)-nearest-neighbor search.

    A kd-tree is used up to ``brute_force_dim`` ambient dimensions and brute
    force beyond. Either way, candidate distances are recomputed from the
    coordinates and re-sorted by (distance, index), so both paths agree.

    :param data: DataMatrix
    :param k: Neighborhood size, 1 <= k <= N - 2
    :param brute_force_dim: Ambient dimension above which the tree is skipped
    :return: NeighborhoodIndex
    """
    n = data.n_points
    if int(k) != k or not 1 <= k <= n - 2:
        raise ParameterError(f"k must satisfy 1 <= k <= N - 2 = {n - 2}, got {k}")
    k = int(k)
    brute_force_dim = brute_force_dim if brute_force_dim is not None else config.BRUTE_FORCE_DIM
    algorithm = 'kd_tree' if data.ambient_dim <= brute_force_dim else 'brute'
    points = data.points

    # self + k+1 neighbors + one extra to detect ties at the cut
    n_query = min(n, k + 3)
    logger.debug(f"kNN search: N={n}, D={data.ambient_dim}, k={k}, algorithm={algorithm}")
    searcher = NearestNeighbors(n_neighbors=n_query, algorithm=algorithm).fit(points)
    _, candidates = searcher.kneighbors(points)

    dist = np.sqrt(((points[candidates] - points[:, None, :]) ** 2).sum(axis=2))
    is_self = candidates == np.arange(n)[:, None]
    dist = np.where(is_self, np.inf, dist)
    order = np.lexsort((candidates, dist), axis=-1)
    candidates = np.take_along_axis(candidates, order, axis=1)
    dist = np.take_along_axis(dist, order, axis=1)

    neighbor_ids = candidates[:, :k + 1].copy()
    distances = dist[:, :k + 1].copy()

    if n_query < n:
        # The next candidate ties the (k+1)-th: tied points may lie outside the
        # candidate set, so settle these rows exhaustively.
        tied = np.flatnonzero(dist[:, k + 1] <= dist[:, k])
        for i in tied:
            neighbor_ids[i], distances[i] = _brute_force_row(points, i, k)
        if tied.size:
            logger.debug(f"Resolved {tied.size} boundary ties by exhaustive search")

    zero = np.flatnonzero(distances[:, k] == 0.0)
    if zero.size:
        raise DuplicatePointsError(
            f"Point {int(zero[0])} has all of its {k + 1} nearest neighbors at distance 0 "
            f"(duplicate points); {zero.size} points affected",
            point_index=int(zero[0]),
        )

    return NeighborhoodIndex(k=k, neighbor_ids=_read_only(neighbor_ids), distances=_read_only(distances))


def rho_statistics(index):
    """
    Normalized nearest-neighbor distance of every point: distance to the
    nearest neighbor divided by distance to the (k+1)-th neighbor.

    :param index: NeighborhoodIndex
    :return: ndarray of N values in (0, 1]
    """
    nearest = index.distances[:, 0]
    farthest = index.distances[:, index.k]
    bad = np.flatnonzero(farthest <= 0.0)
    if bad.size:
        raise DegenerateGeometryError(
            f"Zero distance to the farthest neighbor of point {int(bad[0])}",
            point_index=int(bad[0]),
        )
    bad = np.flatnonzero(nearest <= 0.0)
    if bad.size:
        raise DuplicatePointsError(
            f"Point {int(bad[0])} coincides with its nearest neighbor; "
            f"{bad.size} points affected (deduplicate the data first)",
            point_index=int(bad[0]),
        )
    return np.minimum(nearest / farthest, 1.0)


def _centered_neighbors(points, index, rows):
    ids = index.neighbor_ids[rows, :index.k]
    return points[ids] - points[rows][..., None, :]


def neighborhood_angles(data, index, point, eps=None):
    """
    Pairwise angles of one neighborhood plus the number of pairs skipped
    because a centered vector was shorter than ``eps``.

    :return: (angles, excluded_pairs)
    """
    eps = config.ANGLE_EPS if eps is None else eps
    if not 0 <= point < index.n_points:
        raise ParameterError(f"Point index {point} outside 0..{index.n_points - 1}")
    vectors = _centered_neighbors(data.points, index, point)
    norms = np.linalg.norm(vectors, axis=1)
    usable = norms > eps
    m = int(usable.sum())
    total_pairs = index.k * (index.k - 1) // 2
    if m < 2:
        raise DegenerateGeometryError(
            f"Point {point} has fewer than 2 non-degenerate neighbor vectors",
            point_index=point,
        )
    units = vectors[usable] / norms[usable, None]
    upper = np.triu_indices(m, 1)
    cosines = np.clip((units @ units.T)[upper], -1.0, 1.0)
    return np.arccos(cosines), total_pairs - m * (m - 1) // 2


def pairwise_angles(data, index, point, eps=None):
    """
    Angles in [0, pi] between every unordered pair of the k nearest neighbors
    of ``point`` after translating the point to the origin, in lexicographic
    (z, j), z < j order.
    """
    angles, excluded = neighborhood_angles(data, index, point, eps)
    if excluded:
        logger.debug(f"Point {point}: skipped {excluded} degenerate angle pairs")
    return angles


def angle_matrix(data, index, eps=None):
    """
    Pairwise angles for every neighborhood at once.

    :return: (angles, excluded) where angles is N x C(k,2) with NaN in place
             of degenerate pairs and excluded counts those pairs per point
    """
    eps = config.ANGLE_EPS if eps is None else eps
    k = index.k
    if k < 2:
        raise ParameterError(f"Angles need at least 2 neighbors, got k={k}")
    vectors = _centered_neighbors(data.points, index, np.arange(index.n_points))
    norms = np.linalg.norm(vectors, axis=2)
    usable = norms > eps
    short = np.flatnonzero(usable.sum(axis=1) < 2)
    if short.size:
        raise DegenerateGeometryError(
            f"Point {int(short[0])} has fewer than 2 non-degenerate neighbor vectors",
            point_index=int(short[0]),
        )
    units = np.where(usable[..., None], vectors / np.where(usable, norms, 1.0)[..., None], 0.0)
    gram = np.einsum('nkd,njd->nkj', units, units)
    z, j = np.triu_indices(k, 1)
    angles = np.arccos(np.clip(gram[:, z, j], -1.0, 1.0))
    valid = usable[:, z] & usable[:, j]
    angles[~valid] = np.nan
    excluded = (~valid).sum(axis=1)
    return angles, excluded
