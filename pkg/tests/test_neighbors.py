import math

import numpy as np
import pytest
from scipy.stats import kstest

from src.calibration import sample_hypersphere
from src.errors import DataError, DegenerateGeometryError, DuplicatePointsError, ParameterError
from src.neighbors import (
    DataMatrix,
    angle_matrix,
    build_index,
    neighborhood_angles,
    pairwise_angles,
    rho_statistics,
)
from tests.oracles import brute_force_neighbors

LINE = DataMatrix([[0.0], [1.0], [3.0]])


def _rigid_motion(points, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    rotation, _ = np.linalg.qr(rng.standard_normal((points.shape[1], points.shape[1])))
    return scale * points @ rotation.T + rng.uniform(-5, 5, points.shape[1])


class TestDataMatrix:
    def test_read_only(self):
        data = DataMatrix(np.zeros((4, 2)) + np.arange(4)[:, None])
        with pytest.raises(ValueError):
            data.points[0, 0] = 1.0

    def test_rejects_non_finite(self):
        with pytest.raises(DataError):
            DataMatrix([[0.0, 1.0], [np.nan, 2.0], [1.0, 1.0]])

    def test_rejects_too_few_points(self):
        with pytest.raises(DataError):
            DataMatrix([[0.0], [1.0]])

    def test_deduplicated_keeps_first_occurrence(self):
        data = DataMatrix([[1.0, 1.0], [0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
        np.testing.assert_array_equal(data.deduplicated().points, [[1.0, 1.0], [0.0, 0.0], [2.0, 0.0]])


class TestBuildIndex:
    def test_collinear_points(self):
        index = build_index(LINE, 1)
        np.testing.assert_array_equal(index.neighbor_ids, [[1, 2], [0, 2], [1, 0]])
        np.testing.assert_array_equal(index.distances, [[1.0, 3.0], [1.0, 2.0], [2.0, 3.0]])

    def test_largest_k_lists_every_other_point(self):
        points = np.random.default_rng(1).standard_normal((12, 3))
        index = build_index(DataMatrix(points), 10)
        for i, row in enumerate(index.neighbor_ids):
            assert sorted(row.tolist()) == [j for j in range(12) if j != i]

    @pytest.mark.parametrize("dim", [5, 30])
    def test_matches_brute_force(self, dim):
        points = np.random.default_rng(dim).standard_normal((200, dim))
        index = build_index(DataMatrix(points), 10)
        ids, dists = brute_force_neighbors(points, 10)
        np.testing.assert_array_equal(index.neighbor_ids, ids)
        np.testing.assert_allclose(index.distances, dists, rtol=1e-12)

    def test_ties_broken_by_index(self):
        grid = np.array([[x, y] for x in range(6) for y in range(6)], dtype=float)
        index = build_index(DataMatrix(grid), 4)
        ids, dists = brute_force_neighbors(grid, 4)
        np.testing.assert_array_equal(index.neighbor_ids, ids)
        np.testing.assert_allclose(index.distances, dists)

    def test_rejects_k_out_of_range(self):
        with pytest.raises(ParameterError):
            build_index(LINE, 2)
        with pytest.raises(ParameterError):
            build_index(LINE, 0)

    def test_all_duplicates(self):
        with pytest.raises(DuplicatePointsError):
            build_index(DataMatrix(np.ones((6, 2))), 2)


class TestRhoStatistics:
    def test_collinear_points(self):
        rho = rho_statistics(build_index(LINE, 1))
        np.testing.assert_allclose(rho, [1.0 / 3.0, 0.5, 2.0 / 3.0])

    def test_in_unit_interval(self):
        data = sample_hypersphere(4, 300, np.random.default_rng(0))
        rho = rho_statistics(build_index(data, 10))
        assert np.all((rho > 0) & (rho <= 1))

    def test_duplicate_point_is_reported(self):
        points = np.random.default_rng(3).standard_normal((20, 2))
        points[5] = points[9]
        with pytest.raises(DuplicatePointsError) as info:
            rho_statistics(build_index(DataMatrix(points), 3))
        assert info.value.point_index in (5, 9)

    def test_invariant_under_similarity(self):
        points = np.random.default_rng(8).standard_normal((150, 4))
        moved = _rigid_motion(points, seed=8, scale=3.7)
        rho = rho_statistics(build_index(DataMatrix(points), 8))
        rho_moved = rho_statistics(build_index(DataMatrix(moved), 8))
        np.testing.assert_allclose(rho, rho_moved, rtol=1e-9)

    def test_distribution_matches_density_away_from_the_boundary(self):
        data = sample_hypersphere(5, 50_000, np.random.default_rng(21))
        rho = rho_statistics(build_index(data, 10))
        interior = np.linalg.norm(data.points, axis=1) < 0.6
        result = kstest(rho[interior], lambda r: 1.0 - (1.0 - r ** 5) ** 10)
        assert result.statistic < 0.06


class TestAngles:
    def test_orthogonal_neighbors(self):
        data = DataMatrix([[0.0, 0.0], [1.0, 0.0], [0.0, 1.5], [10.0, 10.0], [-10.0, 10.0]])
        angles = pairwise_angles(data, build_index(data, 2), 0)
        np.testing.assert_allclose(angles, [math.pi / 2])

    def test_parallel_neighbors(self):
        data = DataMatrix([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [10.0, 10.0], [-10.0, 10.0]])
        angles = pairwise_angles(data, build_index(data, 2), 0)
        np.testing.assert_allclose(angles, [0.0], atol=1e-7)

    def test_count_is_binomial(self):
        data = DataMatrix(np.random.default_rng(4).standard_normal((30, 3)))
        assert pairwise_angles(data, build_index(data, 4), 7).size == 6

    def test_matrix_agrees_with_single_point(self):
        data = DataMatrix(np.random.default_rng(6).standard_normal((60, 5)))
        index = build_index(data, 6)
        angles, excluded = angle_matrix(data, index)
        assert angles.shape == (60, 15)
        assert excluded.sum() == 0
        for point in (0, 17, 59):
            np.testing.assert_allclose(angles[point], pairwise_angles(data, index, point), atol=1e-12)

    def test_in_range_and_invariant(self):
        points = np.random.default_rng(9).standard_normal((80, 3))
        angles, _ = angle_matrix(DataMatrix(points), build_index(DataMatrix(points), 5))
        moved = DataMatrix(_rigid_motion(points, seed=9, scale=0.2))
        angles_moved, _ = angle_matrix(moved, build_index(moved, 5))
        assert np.all((angles >= 0) & (angles <= math.pi))
        np.testing.assert_allclose(angles, angles_moved, atol=1e-6)

    def test_degenerate_pairs_are_excluded(self):
        data = DataMatrix([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [9.0, 9.0], [-9.0, 9.0]])
        index = build_index(data, 3)
        angles, excluded = neighborhood_angles(data, index, 0)
        assert excluded == 2
        np.testing.assert_allclose(angles, [math.pi / 2])

    def test_too_few_usable_vectors(self):
        data = DataMatrix([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [5.0, 5.0]])
        with pytest.raises(DegenerateGeometryError):
            neighborhood_angles(data, build_index(data, 2), 0)

    def test_matrix_needs_two_neighbors(self):
        with pytest.raises(ParameterError):
            angle_matrix(LINE, build_index(LINE, 1))
