"""
Angular side of the estimator: von Mises density, the moment-based maximum
likelihood fit of (nu, tau) with the classic three-branch inverse of
A(tau) = I_1(tau) / I_0(tau), and the closed-form KL divergence between two
von Mises densities.
"""

import math
import logging
from dataclasses import dataclass, field

import numpy as np

from src import config
from src.errors import ParameterError
from src.special_functions import bessel_ratio_A, log_bessel_i

# Get logger for this module
logger = logging.getLogger(__name__)

# eta this close to 1 is treated as a point mass
SATURATION_GAP = 1e-12


def wrap_angle(theta):
    """Map an angle (or array of angles) to (-pi, pi]."""
    wrapped = np.mod(np.asarray(theta, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    wrapped = np.where(wrapped <= -np.pi, wrapped + 2.0 * np.pi, wrapped)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


@dataclass(frozen=True)
class VonMisesParams:
    nu: float
    tau: float
    saturated: bool = False
    tau_cap: float = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        tau_cap = config.TAU_CAP if self.tau_cap is None else float(self.tau_cap)
        if not math.isfinite(self.nu):
            raise ParameterError(f"nu must be finite, got {self.nu}")
        if not math.isfinite(self.tau) or self.tau < 0:
            raise ParameterError(f"tau must be a finite non-negative real, got {self.tau}")
        if self.tau > tau_cap:
            raise ParameterError(f"tau={self.tau} exceeds the concentration cap {tau_cap:g}")
        object.__setattr__(self, 'tau_cap', tau_cap)
        object.__setattr__(self, 'nu', wrap_angle(self.nu))
        object.__setattr__(self, 'tau', float(self.tau))


@dataclass(frozen=True, eq=False)
class AngleStats:
    nu: np.ndarray
    tau: np.ndarray
    mu_nu: float
    mu_tau: float
    excluded_pairs: int = 0
    saturated_count: int = 0
    warnings: list = field(default_factory=list)
    tau_cap: float = None

    @property
    def per_point(self):
        return [VonMisesParams(float(n), float(t), tau_cap=self.tau_cap) for n, t in zip(self.nu, self.tau)]

    @property
    def mean_params(self):
        return VonMisesParams(self.mu_nu, self.mu_tau, tau_cap=self.tau_cap)


def vm_pdf(theta, params):
    """
    exp(tau cos(theta - nu)) / (2 pi I_0(tau)), evaluated in log space.
    """
    if not -math.pi <= theta <= math.pi:
        raise ParameterError(f"theta must lie in [-pi, pi], got {theta}")
    log_density = params.tau * math.cos(theta - params.nu) - math.log(2.0 * math.pi) - log_bessel_i(0, params.tau)
    return math.exp(log_density)


def inverse_bessel_ratio(eta):
    """
    Piecewise approximation of A^{-1}(eta) for eta in [0, 1):
    2e + e^3 + 5e^5/6 below 0.53, -0.4 + 1.39e + 0.43/(1 - e) below 0.85,
    1 / (e^3 - 4e^2 + 3e) above. Works elementwise on arrays.
    """
    eta = np.asarray(eta, dtype=np.float64)
    with np.errstate(divide='ignore', invalid='ignore'):
        low = 2.0 * eta + eta ** 3 + 5.0 * eta ** 5 / 6.0
        mid = -0.4 + 1.39 * eta + 0.43 / (1.0 - eta)
        high = 1.0 / (eta ** 3 - 4.0 * eta ** 2 + 3.0 * eta)
    tau = np.where(eta < 0.53, low, np.where(eta < 0.85, mid, high))
    return float(tau) if tau.ndim == 0 else tau


def _fit_from_sums(sin_sum, cos_sum, count, tau_cap):
    nu = np.arctan2(sin_sum, cos_sum)
    eta = np.hypot(sin_sum / count, cos_sum / count)
    saturated = eta >= 1.0 - SATURATION_GAP
    tau = inverse_bessel_ratio(np.where(saturated, 0.0, eta))
    tau = np.where(saturated, tau_cap, np.clip(tau, 0.0, tau_cap))
    saturated = saturated | (tau >= tau_cap)
    return wrap_angle(nu), tau, saturated


def fit_vm(angles, tau_cap=None):
    """
    Maximum-likelihood von Mises fit.

    nu is the quadrant-aware mean direction atan2(sum sin, sum cos); tau comes
    from the piecewise inverse of A applied to the mean resultant length eta,
    clamped to [0, tau_cap]. eta numerically equal to 1 returns tau_cap with
    ``saturated`` set.

    :param angles: At least two angles in radians
    :param tau_cap: Concentration ceiling
    :return: VonMisesParams
    """
    tau_cap = config.TAU_CAP if tau_cap is None else tau_cap
    angles = np.asarray(angles, dtype=np.float64).ravel()
    if angles.size < 2:
        raise ParameterError(f"fit_vm needs at least 2 angles, got {angles.size}")
    nu, tau, saturated = _fit_from_sums(np.sin(angles).sum(), np.cos(angles).sum(), angles.size, tau_cap)
    return VonMisesParams(float(nu), float(tau), bool(saturated), tau_cap)


def circular_mean(angles):
    """Direction of the resultant vector of ``angles``."""
    angles = np.asarray(angles, dtype=np.float64)
    return wrap_angle(float(np.arctan2(np.sin(angles).sum(), np.cos(angles).sum())))


def fit_angle_stats(angles, excluded=None, tau_cap=None):
    """
    Fit one von Mises per neighborhood and reduce to (mu_nu, mu_tau).

    :param angles: N x C(k,2) matrix, NaN marks skipped pairs
    :param excluded: Per-point count of skipped pairs
    :return: AngleStats
    """
    tau_cap = config.TAU_CAP if tau_cap is None else tau_cap
    angles = np.asarray(angles, dtype=np.float64)
    valid = ~np.isnan(angles)
    count = valid.sum(axis=1)
    sin_sum = np.where(valid, np.sin(np.where(valid, angles, 0.0)), 0.0).sum(axis=1)
    cos_sum = np.where(valid, np.cos(np.where(valid, angles, 0.0)), 0.0).sum(axis=1)
    nu, tau, saturated = _fit_from_sums(sin_sum, cos_sum, count, tau_cap)

    warnings = []
    n_saturated = int(saturated.sum())
    if n_saturated:
        message = f"{n_saturated} of {tau.size} neighborhoods have saturated concentration (tau capped at {tau_cap:g})"
        logger.warning(message)
        warnings.append(message)
    excluded_pairs = int(np.sum(excluded)) if excluded is not None else 0
    if excluded_pairs:
        message = f"Skipped {excluded_pairs} degenerate angle pairs"
        logger.warning(message)
        warnings.append(message)

    return AngleStats(
        nu=nu,
        tau=tau,
        mu_nu=circular_mean(nu),
        mu_tau=float(np.mean(tau)),
        excluded_pairs=excluded_pairs,
        saturated_count=n_saturated,
        warnings=warnings,
        tau_cap=tau_cap,
    )


def kl_vonmises(p1, p2):
    """
    KL(q(.; nu1, tau1) || q(.; nu2, tau2))
        = log I_0(tau2) - log I_0(tau1) + A(tau1) (tau1 - tau2 cos(nu2 - nu1)).

    The bracket (I_1(tau1) - I_1(-tau1)) / (2 I_0(tau1)) reduces to A(tau1)
    because I_1 is odd. Round-off below zero is clamped.
    """
    value = (
        log_bessel_i(0, p2.tau)
        - log_bessel_i(0, p1.tau)
        + bessel_ratio_A(p1.tau) * (p1.tau - p2.tau * math.cos(p2.nu - p1.nu))
    )
    return max(value, 0.0)


def concentration_of_dimension(d, n_vectors, seed=None):
    """
    Fit a von Mises to all pairwise angles between ``n_vectors`` random unit
    vectors in R^d and return the concentration, which approaches d as d grows.

    :param d: Dimension, >= 2
    :param n_vectors: Number of random directions
    :param seed: Seed or numpy Generator
    :return: tau estimate
    """
    if int(d) != d or d < 2:
        raise ParameterError(f"d must be an integer >= 2, got {d}")
    if n_vectors < 2:
        raise ParameterError(f"n_vectors must be >= 2, got {n_vectors}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    vectors = rng.standard_normal((int(n_vectors), int(d)))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    upper = np.triu_indices(int(n_vectors), 1)
    angles = np.arccos(np.clip((vectors @ vectors.T)[upper], -1.0, 1.0))
    params = fit_vm(angles)
    logger.debug(f"d={d}: fitted tau={params.tau:.4f} from {angles.size} angles")
    return params.tau
