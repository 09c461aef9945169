"""
Synthetic manifold generators, delay embedding of scalar time series and the
entry point for reading point tables from disk.

Generators draw from ``numpy.random.default_rng(seed)`` so a given spec always
produces the same matrix.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from src.errors import DataError, ParameterError, UnknownGeneratorError
from src.neighbors import DataMatrix
from src.table_reader import TableReader

# Get logger for this module
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ManifoldSpec:
    name: str
    intrinsic_dim: int
    ambient_dim: int
    n_points: int = 2500
    seed: int = 0
    options: dict = field(default_factory=dict, compare=False, hash=False)

    def with_seed(self, seed):
        return ManifoldSpec(self.name, self.intrinsic_dim, self.ambient_dim, self.n_points, seed, dict(self.options))


def _rng(spec):
    return np.random.default_rng(spec.seed)


def _require(condition, message):
    if not condition:
        raise ParameterError(message)


def _hypercube(spec):
    # uniform [0,1]^d plus zero coordinates up to D
    d, big_d = spec.intrinsic_dim, spec.ambient_dim
    _require(big_d >= d, f"hypercube needs D >= d, got d={d}, D={big_d}")
    points = np.zeros((spec.n_points, big_d))
    points[:, :d] = _rng(spec).uniform(0.0, 1.0, size=(spec.n_points, d))
    return points


def _ball(spec):
    d, big_d = spec.intrinsic_dim, spec.ambient_dim
    _require(big_d >= d, f"ball needs D >= d, got d={d}, D={big_d}")
    rng = _rng(spec)
    directions = rng.standard_normal((spec.n_points, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = rng.uniform(0.0, 1.0, size=(spec.n_points, 1)) ** (1.0 / d)
    points = np.zeros((spec.n_points, big_d))
    points[:, :d] = directions * radii
    return points


def _sphere_surface(spec):
    # unit d-sphere lives in R^(d+1)
    d, big_d = spec.intrinsic_dim, spec.ambient_dim
    _require(big_d >= d + 1, f"sphere_surface needs D >= d + 1, got d={d}, D={big_d}")
    directions = _rng(spec).standard_normal((spec.n_points, d + 1))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    points = np.zeros((spec.n_points, big_d))
    points[:, :d + 1] = directions
    return points


def _affine(spec):
    d, big_d = spec.intrinsic_dim, spec.ambient_dim
    _require(big_d >= d, f"affine needs D >= d, got d={d}, D={big_d}")
    rng = _rng(spec)
    coordinates = rng.uniform(0.0, 1.0, size=(spec.n_points, d))
    basis, _ = np.linalg.qr(rng.standard_normal((big_d, d)))
    offset = rng.uniform(-1.0, 1.0, size=big_d)
    return coordinates @ basis.T + offset


def _line(spec):
    _require(spec.intrinsic_dim == 1, "line is one-dimensional")
    return _affine(spec)


def _gaussian(spec):
    d, big_d = spec.intrinsic_dim, spec.ambient_dim
    _require(big_d >= d, f"gaussian needs D >= d, got d={d}, D={big_d}")
    points = np.zeros((spec.n_points, big_d))
    points[:, :d] = _rng(spec).standard_normal((spec.n_points, d))
    return points


def _swiss_roll(spec):
    """
    t = 1.5 pi (1 + 2u), height h = 21 v: (t cos t, h, t sin t).
    """
    _require(spec.intrinsic_dim == 2 and spec.ambient_dim == 3, "swiss_roll is a 2-d surface in R^3")
    rng = _rng(spec)
    t = 1.5 * np.pi * (1.0 + 2.0 * rng.uniform(0.0, 1.0, spec.n_points))
    height = 21.0 * rng.uniform(0.0, 1.0, spec.n_points)
    return np.column_stack([t * np.cos(t), height, t * np.sin(t)])


def _helix(spec):
    """
    Helicoid strip: (s cos(4 pi u), s sin(4 pi u), 2u) with u, s uniform on [0, 1], [0.5, 1].
    """
    _require(spec.intrinsic_dim == 2 and spec.ambient_dim == 3, "helix is a 2-d surface in R^3")
    rng = _rng(spec)
    u = rng.uniform(0.0, 1.0, spec.n_points)
    s = rng.uniform(0.5, 1.0, spec.n_points)
    angle = 4.0 * np.pi * u
    return np.column_stack([s * np.cos(angle), s * np.sin(angle), 2.0 * u])


def _doubled_trig_embedding(spec, base_dim):
    _require(spec.intrinsic_dim == base_dim and spec.ambient_dim == 4 * base_dim,
             f"{spec.name} is a {base_dim}-d manifold in R^{4 * base_dim}")
    u = _rng(spec).uniform(0.0, 1.0, size=(spec.n_points, base_dim))
    first = u * np.sin(np.cos(2.0 * np.pi * u))
    second = u * np.cos(np.sin(2.0 * np.pi * u))
    # duplicate every coordinate: columns (2j, 2j+1) are equal
    return np.repeat(np.hstack([first, second]), 2, axis=1)


def _m13(spec):
    return _doubled_trig_embedding(spec, 18)


def _m14(spec):
    return _doubled_trig_embedding(spec, 24)


GENERATORS = {
    'hypercube': _hypercube,
    'ball': _ball,
    'sphere_surface': _sphere_surface,
    'affine': _affine,
    'line': _line,
    'gaussian': _gaussian,
    'swiss_roll': _swiss_roll,
    'helix': _helix,
    'm13': _m13,
    'm14': _m14,
}

# Default (d, D) for generators whose geometry fixes them
DEFAULT_DIMS = {
    'swiss_roll': (2, 3),
    'helix': (2, 3),
    'm13': (18, 72),
    'm14': (24, 96),
    'sphere_surface': (10, 11),
    'gaussian': (20, 20),
}


def make_spec(name, intrinsic_dim=None, ambient_dim=None, n_points=2500, seed=0):
    """
    Build a ManifoldSpec, filling dimensions from the generator defaults.
    """
    if name not in GENERATORS:
        raise UnknownGeneratorError(f"Unknown generator {name!r}; available: {', '.join(sorted(GENERATORS))}")
    default_d, default_big_d = DEFAULT_DIMS.get(name, (None, None))
    d = intrinsic_dim if intrinsic_dim is not None else default_d
    if d is None:
        raise ParameterError(f"Generator {name!r} needs an intrinsic dimension")
    if ambient_dim is not None:
        big_d = ambient_dim
    elif default_big_d is not None and intrinsic_dim is None:
        big_d = default_big_d
    elif name == 'sphere_surface':
        big_d = d + 1
    elif name == 'hypercube':
        big_d = d + 1
    else:
        big_d = d
    return ManifoldSpec(name=name, intrinsic_dim=int(d), ambient_dim=int(big_d), n_points=int(n_points), seed=int(seed))


def generate(spec):
    """
    Draw the dataset described by ``spec``.

    :param spec: ManifoldSpec
    :return: DataMatrix of spec.n_points x spec.ambient_dim
    """
    generator = GENERATORS.get(spec.name)
    if generator is None:
        raise UnknownGeneratorError(f"Unknown generator {spec.name!r}; available: {', '.join(sorted(GENERATORS))}")
    _require(spec.intrinsic_dim >= 1, f"Intrinsic dimension must be >= 1, got {spec.intrinsic_dim}")
    _require(spec.intrinsic_dim <= spec.ambient_dim, f"Need d <= D, got d={spec.intrinsic_dim}, D={spec.ambient_dim}")
    _require(spec.n_points >= 3, f"Need at least 3 points, got {spec.n_points}")
    logger.debug(f"Generating {spec.name}: d={spec.intrinsic_dim}, D={spec.ambient_dim}, N={spec.n_points}, seed={spec.seed}")
    return DataMatrix(generator(spec))


def delay_embed(series, D):
    """
    Method of delays with non-overlapping windows: row t is
    series[t*D : (t+1)*D]; the trailing len % D samples are dropped.

    :param series: 1-D sequence of reals
    :param D: Window length
    :return: DataMatrix with floor(len / D) rows
    """
    series = np.asarray(series, dtype=np.float64).ravel()
    if int(D) != D or D < 1:
        raise ParameterError(f"Embedding dimension must be a positive integer, got {D}")
    D = int(D)
    if series.size < D:
        raise DataError(f"Series of length {series.size} is shorter than the embedding dimension {D}")
    rows = series.size // D
    dropped = series.size - rows * D
    if dropped:
        logger.info(f"Delay embedding dropped the last {dropped} samples")
    return DataMatrix(series[:rows * D].reshape(rows, D))


def load_table(path, has_header=None, delimiter=None, sheet_name=None):
    """
    Read a point table (CSV, whitespace-delimited text or .xlsx).

    :param path: File path
    :param has_header: True/False to force, None to detect
    :param delimiter: ',' or None for automatic detection
    :param sheet_name: Sheet for .xlsx input
    :return: DataMatrix
    """
    reader = TableReader(file_path=path, has_header=has_header, delimiter=delimiter, sheet_name=sheet_name)
    return DataMatrix(reader.read_matrix())
