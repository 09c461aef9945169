import numpy as np
import pytest
from scipy.stats import kstest

from src.calibration import (
    FORMAT_VERSION,
    build_calibration,
    load_calibration,
    sample_hypersphere,
    save_calibration,
    substream,
)
from src.errors import (
    CalibrationCorruptError,
    CalibrationInvariantError,
    CalibrationMismatchError,
    CalibrationVersionError,
    ParameterError,
)


@pytest.fixture(scope='module')
def small_table():
    return build_calibration(4, 300, 6, n_reps=1, seed=3)


class TestSampleHypersphere:
    def test_inside_unit_ball(self):
        data = sample_hypersphere(7, 2000, np.random.default_rng(0))
        assert data.points.shape == (2000, 7)
        assert np.all(np.linalg.norm(data.points, axis=1) <= 1.0)

    def test_one_dimensional_is_uniform_segment(self):
        data = sample_hypersphere(1, 10_000, np.random.default_rng(1))
        assert kstest(data.points[:, 0], 'uniform', args=(-1.0, 2.0)).statistic < 0.02

    def test_volume_fraction(self):
        data = sample_hypersphere(10, 10_000, np.random.default_rng(2))
        fraction = np.mean(np.linalg.norm(data.points, axis=1) <= 0.9)
        assert fraction == pytest.approx(0.9 ** 10, abs=0.02)

    def test_deterministic_for_a_seed(self):
        first = sample_hypersphere(3, 50, substream(4, 3, 0))
        second = sample_hypersphere(3, 50, substream(4, 3, 0))
        np.testing.assert_array_equal(first.points, second.points)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ParameterError):
            sample_hypersphere(0, 10, 0)
        with pytest.raises(ParameterError):
            sample_hypersphere(2, 2, 0)


class TestBuildCalibration:
    def test_covers_every_dimension(self, small_table):
        assert [entry.d for entry in small_table.entries] == [1, 2, 3, 4]
        assert small_table.max_dim == 4
        assert small_table.n_points == 300 and small_table.k == 6

    def test_bitwise_deterministic(self, small_table):
        again = build_calibration(4, 300, 6, n_reps=1, seed=3)
        assert again.entries == small_table.entries
        assert again.calibration_id == small_table.calibration_id

    def test_extending_range_keeps_entries(self, small_table):
        shorter = build_calibration(2, 300, 6, n_reps=1, seed=3)
        assert shorter.entries == small_table.entries[:2]

    def test_thread_pool_gives_same_table(self, small_table):
        parallel = build_calibration(4, 300, 6, n_reps=1, seed=3, workers=3)
        assert parallel.entries == small_table.entries

    def test_seed_changes_entries(self, small_table):
        other = build_calibration(4, 300, 6, n_reps=1, seed=4)
        assert other.entries != small_table.entries
        assert other.calibration_id != small_table.calibration_id

    def test_curves_increase_with_dimension(self, small_table):
        d_check = [entry.d_check_ml for entry in small_table.entries]
        assert np.all(np.diff(d_check) > 0)

    @pytest.mark.parametrize("max_dim, n, k", [(0, 100, 5), (3, 100, 1), (3, 10, 9)])
    def test_rejects_bad_arguments(self, max_dim, n, k):
        with pytest.raises(ParameterError):
            build_calibration(max_dim, n, k)

    def test_check_compatible(self, small_table):
        small_table.check_compatible(300, 6)
        with pytest.raises(CalibrationMismatchError):
            small_table.check_compatible(301, 6)
        with pytest.raises(CalibrationMismatchError):
            small_table.check_compatible(300, 5)


@pytest.mark.slow
class TestCalibrationCurves:
    def test_distance_curve_monotone_up_to_30(self):
        tables = [build_calibration(30, 2500, 10, n_reps=1, seed=seed) for seed in range(3)]
        d_check = np.mean([[entry.d_check_ml for entry in table.entries] for table in tables], axis=0)
        assert np.all(np.diff(d_check[1:]) > 0)
        assert d_check[9] < 10.0

    def test_angle_concentration_grows(self):
        table = build_calibration(20, 2500, 10, n_reps=1, seed=0)
        taus = [table.entry(d).mu_tau for d in (5, 10, 20)]
        assert taus[0] < taus[1] < taus[2]


class TestCacheFile:
    def test_round_trip_is_exact(self, small_table, tmp_path):
        path = tmp_path / 'calibration.txt'
        save_calibration(small_table, path)
        loaded = load_calibration(path)
        assert loaded == small_table
        assert loaded.calibration_id == small_table.calibration_id

    def test_creates_missing_directory(self, small_table, tmp_path):
        path = tmp_path / 'cache' / 'nested' / 'calibration.txt'
        save_calibration(small_table, path)
        assert load_calibration(path).entries == small_table.entries

    def test_truncated_file(self, small_table, tmp_path):
        path = tmp_path / 'calibration.txt'
        save_calibration(small_table, path)
        lines = path.read_text().splitlines()
        path.write_text('\n'.join(lines[:-2]) + '\n')
        with pytest.raises(CalibrationCorruptError):
            load_calibration(path)

    def test_unknown_version(self, small_table, tmp_path):
        path = tmp_path / 'calibration.txt'
        save_calibration(small_table, path)
        text = path.read_text().replace(f"format_version = {FORMAT_VERSION}", "format_version = 99")
        path.write_text(text)
        with pytest.raises(CalibrationVersionError):
            load_calibration(path)

    def test_gap_in_dimensions(self, small_table, tmp_path):
        path = tmp_path / 'calibration.txt'
        save_calibration(small_table, path)
        lines = [line for line in path.read_text().splitlines() if not line.startswith('2,')]
        path.write_text('\n'.join(lines) + '\n')
        with pytest.raises(CalibrationInvariantError):
            load_calibration(path)

    def test_non_numeric_record(self, small_table, tmp_path):
        path = tmp_path / 'calibration.txt'
        save_calibration(small_table, path)
        text = path.read_text().replace('\n3,', '\n3,abc,', 1)
        path.write_text(text)
        with pytest.raises(CalibrationCorruptError):
            load_calibration(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CalibrationCorruptError):
            load_calibration(tmp_path / 'absent.txt')
