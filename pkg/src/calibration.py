"""
Reference statistics for every candidate dimension d in 1..D, computed on
points drawn uniformly from unit d-balls, plus a plain-text cache format.

Every (d, repetition) pair draws from its own numpy SeedSequence substream
keyed by (d, rep), so extending D never changes the entries already built.
"""

import os
import math
import hashlib
import logging
from dataclasses import dataclass, field
from multiprocessing.pool import ThreadPool

import numpy as np

from src import config
from src.angle_model import fit_angle_stats
from src.errors import (
    CalibrationCorruptError,
    CalibrationInvariantError,
    CalibrationMismatchError,
    CalibrationVersionError,
    ParameterError,
)
from src.neighbors import DataMatrix, angle_matrix, build_index, rho_statistics
from src.norm_model import norm_stats

# Get logger for this module
logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
GENERATOR_NAME = 'numpy.PCG64/SeedSequence'
HEADER_FIELDS = ('format_version', 'generator', 'n_points', 'k', 'max_dim', 'n_reps', 'seed')
RECORD_COLUMNS = ('d', 'd_check_ml', 'mu_nu', 'mu_tau')


@dataclass(frozen=True)
class CalibrationEntry:
    d: int
    d_check_ml: float
    mu_nu: float
    mu_tau: float


@dataclass(frozen=True)
class CalibrationTable:
    entries: tuple
    n_points: int
    k: int
    n_reps: int
    seed: int
    format_version: int = FORMAT_VERSION
    generator: str = GENERATOR_NAME
    warnings: tuple = field(default=(), compare=False)

    @property
    def max_dim(self):
        return len(self.entries)

    @property
    def calibration_id(self):
        """Short hash of the header, echoed in estimation results."""
        key = f"{self.format_version}|{self.generator}|{self.n_points}|{self.k}|{self.max_dim}|{self.n_reps}|{self.seed}"
        return hashlib.sha1(key.encode('utf-8')).hexdigest()[:12]

    def entry(self, d):
        return self.entries[d - 1]

    def validate(self):
        """
        Check that entries cover 1..D without gaps and hold admissible values.
        """
        if not self.entries:
            raise CalibrationInvariantError("Calibration table has no entries")
        for position, entry in enumerate(self.entries, start=1):
            if entry.d != position:
                raise CalibrationInvariantError(f"Calibration entries must cover 1..D in order; expected d={position}, found d={entry.d}")
            if not entry.d_check_ml >= 1 or not math.isfinite(entry.d_check_ml):
                raise CalibrationInvariantError(f"Entry d={entry.d} has invalid d_check_ml {entry.d_check_ml}")
            if not entry.mu_tau >= 0 or not math.isfinite(entry.mu_tau) or not math.isfinite(entry.mu_nu):
                raise CalibrationInvariantError(f"Entry d={entry.d} has invalid von Mises means ({entry.mu_nu}, {entry.mu_tau})")
        if self.k < 2 or self.n_points < self.k + 2:
            raise CalibrationInvariantError(f"Calibration header has inadmissible n={self.n_points}, k={self.k}")
        return self

    def check_compatible(self, n_points, k):
        """
        Refuse to compare against statistics computed with a different (N, k).
        """
        if self.n_points != n_points or self.k != k:
            raise CalibrationMismatchError(
                f"Calibration was built for N={self.n_points}, k={self.k} but the data has N={n_points}, k={k}"
            )


def substream(seed, *key):
    """Independent generator for a (d, rep, ...) key under ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(int(v) for v in key))))


def sample_hypersphere(d, n, rng):
    """
    n points uniform in the unit d-ball: Gaussian direction scaled to radius U^(1/d).

    :param d: Dimension, >= 1
    :param n: Number of points, >= 3
    :param rng: numpy Generator or seed
    :return: DataMatrix
    """
    if int(d) != d or d < 1:
        raise ParameterError(f"d must be a positive integer, got {d}")
    if int(n) != n or n < 3:
        raise ParameterError(f"n must be an integer >= 3, got {n}")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    d, n = int(d), int(n)
    directions = rng.standard_normal((n, d))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    while np.any(norms == 0.0):
        zero = norms[:, 0] == 0.0
        directions[zero] = rng.standard_normal((int(zero.sum()), d))
        norms = np.linalg.norm(directions, axis=1, keepdims=True)
    radii = rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / d)
    return DataMatrix(directions / norms * radii)


def dataset_statistics(data, k, d_max):
    """
    Norm and angle statistics of one dataset: (NormStats, AngleStats).
    """
    index = build_index(data, k)
    norm = norm_stats(rho_statistics(index), k, d_max)
    angles, excluded = angle_matrix(data, index)
    return norm, fit_angle_stats(angles, excluded)


def ml_search_ceiling(d):
    """
    Upper end of the likelihood search for a d-ball sample. It depends on d
    alone so an entry never changes when the table is extended.
    """
    return 2 * d + 10


def _calibrate_dimension(args):
    d, n, k, n_reps, seed = args
    d_max = ml_search_ceiling(d)
    d_mls, mu_nus, mu_taus = [], [], []
    saturated = 0
    for rep in range(n_reps):
        sample = sample_hypersphere(d, n, substream(seed, d, rep))
        norm, angle_stats = dataset_statistics(sample, k, d_max)
        d_mls.append(norm.d_ml)
        mu_nus.append(angle_stats.mu_nu)
        mu_taus.append(angle_stats.mu_tau)
        saturated += angle_stats.saturated_count
    entry = CalibrationEntry(d=d, d_check_ml=float(np.mean(d_mls)),
                             mu_nu=float(np.mean(mu_nus)), mu_tau=float(np.mean(mu_taus)))
    logger.debug(f"Calibrated d={d}: d_check_ml={entry.d_check_ml:.4f}, mu_nu={entry.mu_nu:.4f}, mu_tau={entry.mu_tau:.4f}")
    return entry, saturated


def build_calibration(max_dim, n, k, n_reps=None, seed=None, workers=None):
    """
    Build reference statistics for d = 1..max_dim.

    :param max_dim: Largest candidate dimension D
    :param n: Points per calibration sample (must equal the data's N)
    :param k: Neighborhood size
    :param n_reps: Independent samples averaged per d
    :param seed: Root seed
    :param workers: Thread count for the per-d jobs
    :return: CalibrationTable
    """
    n_reps = n_reps if n_reps is not None else config.CALIBRATION_REPS
    seed = seed if seed is not None else config.DEFAULT_SEED
    workers = workers if workers is not None else config.WORKERS
    if int(max_dim) != max_dim or max_dim < 1:
        raise ParameterError(f"max_dim must be a positive integer, got {max_dim}")
    if int(k) != k or not 2 <= k <= n - 2:
        raise ParameterError(f"k must satisfy 2 <= k <= n - 2, got k={k}, n={n}")
    if n_reps < 1:
        raise ParameterError(f"n_reps must be >= 1, got {n_reps}")
    max_dim, n, k, n_reps, seed = int(max_dim), int(n), int(k), int(n_reps), int(seed)

    logger.info(f"Building calibration: D={max_dim}, N={n}, k={k}, reps={n_reps}, seed={seed}, workers={workers}")
    jobs = [(d, n, k, n_reps, seed) for d in range(1, max_dim + 1)]
    if workers > 1:
        with ThreadPool(workers) as pool:
            results = pool.map(_calibrate_dimension, jobs)
    else:
        results = [_calibrate_dimension(job) for job in jobs]

    entries = tuple(entry for entry, _ in results)
    saturated = sum(count for _, count in results)
    warnings = ()
    if saturated:
        message = f"{saturated} calibration neighborhoods saturated the concentration cap"
        logger.info(message)
        warnings = (message,)
    table = CalibrationTable(entries=entries, n_points=n, k=k, n_reps=n_reps, seed=seed, warnings=warnings)
    logger.info(f"Calibration {table.calibration_id} built with {len(entries)} entries")
    return table.validate()


def save_calibration(table, path):
    """
    Write the table as a header block of ``key = value`` lines followed by one
    comma-separated record per d. Floats use repr(), which round-trips exactly.
    """
    lines = ['# intrinsic dimension calibration table']
    header = {
        'format_version': table.format_version,
        'generator': table.generator,
        'n_points': table.n_points,
        'k': table.k,
        'max_dim': table.max_dim,
        'n_reps': table.n_reps,
        'seed': table.seed,
    }
    lines.extend(f"{key} = {header[key]}" for key in HEADER_FIELDS)
    lines.append(','.join(RECORD_COLUMNS))
    for entry in table.entries:
        lines.append(f"{entry.d},{entry.d_check_ml!r},{entry.mu_nu!r},{entry.mu_tau!r}")
    lines.append('# end')

    directory = os.path.dirname(os.fspath(path))
    if directory and not os.path.exists(directory):
        os.makedirs(directory)
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write('\n'.join(lines) + '\n')
    logger.info(f"Saved calibration {table.calibration_id} to {path}")


def load_calibration(path):
    """
    Read a table written by save_calibration, validating version and invariants.

    :raises CalibrationVersionError: unknown format_version
    :raises CalibrationCorruptError: unreadable, truncated or malformed file
    :raises CalibrationInvariantError: entries with gaps or invalid values
    """
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            raw_lines = handle.read().splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise CalibrationCorruptError(f"Cannot read calibration file {path}: {e}")

    if not raw_lines or raw_lines[-1].strip() != '# end':
        raise CalibrationCorruptError(f"Calibration file {path} is truncated (missing end marker)")
    body = [line for line in raw_lines[:-1] if line.strip() and not line.startswith('#')]

    header = {}
    position = 0
    while position < len(body) and '=' in body[position]:
        key, _, value = body[position].partition('=')
        header[key.strip()] = value.strip()
        position += 1

    missing = [key for key in HEADER_FIELDS if key not in header]
    if missing:
        raise CalibrationCorruptError(f"Calibration file {path} lacks header fields {missing}")
    try:
        version = int(header['format_version'])
    except ValueError:
        raise CalibrationCorruptError(f"Bad format_version {header['format_version']!r} in {path}")
    if version != FORMAT_VERSION:
        raise CalibrationVersionError(f"Calibration file {path} has format_version {version}, expected {FORMAT_VERSION}")

    if position >= len(body) or tuple(c.strip() for c in body[position].split(',')) != RECORD_COLUMNS:
        raise CalibrationCorruptError(f"Calibration file {path} lacks the record header {','.join(RECORD_COLUMNS)}")

    entries = []
    for line in body[position + 1:]:
        cells = line.split(',')
        if len(cells) != len(RECORD_COLUMNS):
            raise CalibrationCorruptError(f"Malformed calibration record {line!r} in {path}")
        try:
            entries.append(CalibrationEntry(d=int(cells[0]), d_check_ml=float(cells[1]),
                                            mu_nu=float(cells[2]), mu_tau=float(cells[3])))
        except ValueError:
            raise CalibrationCorruptError(f"Non-numeric calibration record {line!r} in {path}")

    try:
        table = CalibrationTable(
            entries=tuple(entries),
            n_points=int(header['n_points']),
            k=int(header['k']),
            n_reps=int(header['n_reps']),
            seed=int(header['seed']),
            format_version=version,
            generator=header['generator'],
        )
        declared_dim = int(header['max_dim'])
    except ValueError as e:
        raise CalibrationCorruptError(f"Bad header value in {path}: {e}")

    table.validate()
    if declared_dim != table.max_dim:
        raise CalibrationInvariantError(f"Header declares max_dim={declared_dim} but {table.max_dim} entries are present")
    logger.info(f"Loaded calibration {table.calibration_id} from {path} (D={table.max_dim}, N={table.n_points}, k={table.k})")
    return table
