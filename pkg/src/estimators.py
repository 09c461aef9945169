"""
Intrinsic dimension estimators.

``estimate_danco`` combines the distance and angle divergences against a
calibration table; ``estimate_mind_kl`` keeps only the distance divergence;
``estimate_mind_ml`` reports the rounded likelihood maximizer; the
Levina-Bickel MLE and the Grassberger-Procaccia correlation dimension are the
geometric baselines used by the benchmark.
"""

import math
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import linregress

from src import config
from src.angle_model import VonMisesParams, kl_vonmises
from src.calibration import dataset_statistics
from src.errors import DegenerateGeometryError, ParameterError, ScalingRegionError
from src.neighbors import build_index, rho_statistics
from src.norm_model import MAX_CLOSED_FORM_K, kl_norms, kl_norms_quadrature, norm_stats

# Get logger for this module
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KLProfileRow:
    d: int
    kl_norm: float
    kl_vm: float

    @property
    def total(self):
        return self.kl_norm + self.kl_vm


@dataclass
class EstimateResult:
    method: str
    d_hat: float
    params: dict = field(default_factory=dict)
    kl_profile: list = None
    warnings: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def profile_totals(self):
        return np.array([row.total for row in self.kl_profile]) if self.kl_profile else np.array([])


def _check_d_max(d_max):
    if int(d_max) != d_max or d_max < 1:
        raise ParameterError(f"D_max must be a positive integer, got {d_max}")
    return int(d_max)


def out_of_range_warnings(method, d_hat, ambient_dim):
    """Warn when a fractional estimate falls outside [1, D]. The value is kept as is."""
    if 1.0 <= d_hat <= ambient_dim:
        return []
    message = f"{method}: estimate {d_hat:.3f} lies outside [1, {ambient_dim}]"
    logger.warning(message)
    return [message]


def argmin_smallest(values, near_tie_gap=None):
    """
    Index of the minimum with ties resolved toward the smallest index, plus a
    flag telling whether another index comes within ``near_tie_gap`` of it.
    """
    near_tie_gap = config.NEAR_TIE_GAP if near_tie_gap is None else near_tie_gap
    values = np.asarray(values, dtype=np.float64)
    best = int(np.argmin(values))  # np.argmin returns the first occurrence
    others = np.delete(values, best)
    near_tie = bool(others.size and np.min(others) - values[best] < near_tie_gap)
    return best, near_tie


def _kl_profile(d_ml, angle_params, calib, k, d_max, use_angles):
    divergence = kl_norms
    if k > MAX_CLOSED_FORM_K:
        logger.info(f"k={k} exceeds the closed-form range; evaluating the distance KL by quadrature")
        divergence = kl_norms_quadrature
    rows = []
    for d in range(1, d_max + 1):
        entry = calib.entry(d)
        kl_norm = divergence(d_ml, entry.d_check_ml, k)
        kl_vm = kl_vonmises(angle_params, VonMisesParams(entry.mu_nu, entry.mu_tau)) if use_angles else 0.0
        rows.append(KLProfileRow(d=d, kl_norm=kl_norm, kl_vm=kl_vm))
    return rows


def _calibrated_estimate(method, data, k, d_max, calib, use_angles):
    k = int(k)
    d_max = _check_d_max(d_max)
    calib.check_compatible(data.n_points, k)
    if d_max > calib.max_dim:
        raise ParameterError(f"D_max={d_max} exceeds the calibration range D={calib.max_dim}")

    norm, angle_stats = dataset_statistics(data, k, calib.max_dim)
    d_ml = norm.d_ml
    profile = _kl_profile(d_ml, angle_stats.mean_params, calib, k, d_max, use_angles)
    best, near_tie = argmin_smallest([row.total for row in profile])

    warnings = list(norm.warnings)
    if use_angles:
        warnings.extend(angle_stats.warnings)
    if near_tie:
        message = f"Near-tie in the KL profile around d={best + 1}; smallest d chosen"
        logger.warning(message)
        warnings.append(message)

    result = EstimateResult(
        method=method,
        d_hat=float(best + 1),
        params={'k': k, 'D': d_max, 'seed': calib.seed, 'calibration_id': calib.calibration_id},
        kl_profile=profile,
        warnings=warnings,
        diagnostics={'d_ml': d_ml, 'mu_nu': angle_stats.mu_nu, 'mu_tau': angle_stats.mu_tau,
                     'excluded_pairs': angle_stats.excluded_pairs},
    )
    logger.info(f"{method}: d_hat={result.d_hat:g} (d_ml={d_ml:.3f}, mu_tau={angle_stats.mu_tau:.3f})")
    return result


def estimate_danco(data, k, D_max, calib, use_angles=True):
    """
    DANCo estimate: argmin over d in 1..D_max of
    KL_norm(d_ml, d_check_ml(d)) + KL_vm((mu_nu, mu_tau), (mu_nu(d), mu_tau(d))).

    :param data: DataMatrix
    :param k: Neighborhood size (must match the calibration)
    :param D_max: Largest candidate dimension (<= calibration range)
    :param calib: CalibrationTable built with the data's N and k
    :param use_angles: False drops the angle term (norm-only diagnostic mode)
    :return: EstimateResult with the full KL profile
    """
    return _calibrated_estimate('danco' if use_angles else 'mind_kl', data, k, D_max, calib, use_angles)


def estimate_mind_kl(data, k, D_max, calib):
    """Norm-only KL estimator against the same calibration table."""
    return _calibrated_estimate('mind_kl', data, k, D_max, calib, use_angles=False)


def estimate_mind_ml(data, k, D_max):
    """
    Likelihood maximizer of the normalized-distance density, rounded to the
    nearest integer in [1, D_max]. No calibration involved.
    """
    d_max = _check_d_max(D_max)
    index = build_index(data, k)
    norm = norm_stats(rho_statistics(index), k, d_max)
    d_ml = norm.d_ml
    d_hat = float(min(max(int(math.floor(d_ml + 0.5)), 1), d_max))
    logger.info(f"mind_ml: d_hat={d_hat:g} (continuous {d_ml:.3f})")
    return EstimateResult(method='mind_ml', d_hat=d_hat, params={'k': int(k), 'D': d_max},
                          warnings=list(norm.warnings), diagnostics={'d_ml': d_ml})


def estimate_mle_lb(data, k1=None, k2=None):
    """
    Levina-Bickel maximum likelihood estimate averaged over k in [k1, k2].

    For each k the per-point estimate is (k - 2) / sum_{j<k} log(T_k / T_j),
    averaged over points; the k-wise estimates are then averaged.

    :param data: DataMatrix
    :param k1: Smallest neighborhood (>= 3)
    :param k2: Largest neighborhood (<= N - 2)
    :return: EstimateResult with fractional d_hat
    """
    k1 = config.MLE_K1 if k1 is None else int(k1)
    k2 = config.MLE_K2 if k2 is None else int(k2)
    if not 3 <= k1 < k2 <= data.n_points - 2:
        raise ParameterError(f"Need 3 <= k1 < k2 <= N - 2, got k1={k1}, k2={k2}, N={data.n_points}")

    index = build_index(data, k2 - 1)
    distances = index.distances
    if np.any(distances <= 0.0):
        row = int(np.argwhere(distances <= 0.0)[0][0])
        raise DegenerateGeometryError(f"Zero neighbor distance at point {row}; MLE needs distinct points", point_index=row)

    log_dist = np.log(distances)
    cumulative = np.cumsum(log_dist, axis=1)
    ks = np.arange(k1, k2 + 1)
    # sum_{j<=k} log T_j - k log T_k = -sum_{j<k} log(T_k / T_j)
    denominators = cumulative[:, ks - 1] - log_dist[:, ks - 1] * ks
    per_point = -(ks - 2) / denominators
    per_k = per_point.mean(axis=0)
    d_hat = float(per_k.mean())
    logger.info(f"mle: d_hat={d_hat:.3f} over k={k1}..{k2}")
    return EstimateResult(method='mle', d_hat=d_hat, params={'k1': k1, 'k2': k2},
                          warnings=out_of_range_warnings('mle', d_hat, data.ambient_dim),
                          diagnostics={'per_k': dict(zip(ks.tolist(), per_k.tolist()))})


@dataclass(frozen=True)
class RadiusGrid:
    """
    Radius grid for the correlation integral.

    ``scale='neighbor'`` spans the median to the maximum nearest-neighbor
    distance; ``scale='pairwise'`` spans the ``lower_quantile`` to the
    ``upper_quantile`` of all pairwise distances. The slope is fitted on the
    central ``core_fraction`` of the log-spaced grid.
    """

    scale: str = 'neighbor'
    n_radii: int = 20
    core_fraction: float = 0.6
    lower_quantile: float = 0.05
    upper_quantile: float = 0.5


def _radius_bounds(data, pair_distances, grid):
    if grid.scale == 'pairwise':
        return np.quantile(pair_distances, [grid.lower_quantile, grid.upper_quantile])
    if grid.scale == 'neighbor':
        nearest = np.sort(pair_distances_to_nearest(data))
        return np.median(nearest), nearest[-1]
    raise ParameterError(f"Unknown radius scale {grid.scale!r}; expected 'neighbor' or 'pairwise'")


def pair_distances_to_nearest(data):
    index = build_index(data, 1)
    return index.distances[:, 0]


def estimate_cd(data, r_grid_spec=None):
    """
    Correlation dimension: least-squares slope of log C(r) against log r,
    where C(r) is the fraction of point pairs closer than r.

    :param data: DataMatrix (N >= 100 recommended)
    :param r_grid_spec: RadiusGrid
    :return: EstimateResult with the fitted region and residual in diagnostics
    """
    grid = r_grid_spec or RadiusGrid()
    if not 0 < grid.core_fraction <= 1 or grid.n_radii < 3:
        raise ParameterError(f"Invalid radius grid {grid}")
    if data.n_points < 100:
        logger.warning(f"Correlation dimension on only {data.n_points} points is unreliable")

    pair_distances = np.sort(pdist(data.points))
    try:
        r_low, r_high = _radius_bounds(data, pair_distances, grid)
    except DegenerateGeometryError as e:
        raise ScalingRegionError(f"Empty scaling region: {e}")
    if not (r_low > 0 and r_high > r_low):
        raise ScalingRegionError(f"Empty scaling region: radius bounds ({r_low}, {r_high}) are degenerate")

    radii = np.geomspace(r_low, r_high, grid.n_radii)
    trim = int(round(grid.n_radii * (1.0 - grid.core_fraction) / 2.0))
    core = radii[trim:grid.n_radii - trim]
    counts = np.searchsorted(pair_distances, core, side='left')
    usable = counts > 0
    if usable.sum() < 2:
        raise ScalingRegionError("Empty scaling region: fewer than two radii with non-zero correlation integral")
    correlation = counts[usable] / pair_distances.size
    fit = linregress(np.log(core[usable]), np.log(correlation))
    residual = float(np.sqrt(np.mean((np.log(correlation) - (fit.intercept + fit.slope * np.log(core[usable]))) ** 2)))
    logger.info(f"cd: d_hat={fit.slope:.3f} over r in [{core[usable][0]:.4g}, {core[usable][-1]:.4g}]")
    return EstimateResult(
        method='cd',
        d_hat=float(fit.slope),
        warnings=out_of_range_warnings('cd', float(fit.slope), data.ambient_dim),
        params={'scale': grid.scale, 'n_radii': grid.n_radii, 'core_fraction': grid.core_fraction},
        diagnostics={'r_min': float(core[usable][0]), 'r_max': float(core[usable][-1]),
                     'grid_min': float(r_low), 'grid_max': float(r_high), 'residual': residual},
    )


def mpe(results):
    """
    Mean percentage error (100 / M) sum |d_hat - d| / d over (d_true, d_hat) pairs.
    """
    results = list(results)
    if not results:
        raise ParameterError("mpe needs at least one (d_true, d_hat) pair")
    errors = []
    for d_true, d_hat in results:
        if not d_true > 0:
            raise ParameterError(f"True dimension must be positive, got {d_true}")
        errors.append(abs(d_hat - d_true) / d_true)
    return 100.0 * sum(errors) / len(errors)
