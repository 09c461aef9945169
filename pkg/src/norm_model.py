"""
Distance side of the estimator: the density of the normalized nearest-neighbor
distance, its maximum-likelihood dimension fit and the closed-form
Kullback-Leibler divergence between two such densities.
"""

import math
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from src import config
from src.errors import NumericInstabilityError, ParameterError
from src.special_functions import digamma, harmonic

# Get logger for this module
logger = logging.getLogger(__name__)

# Beyond this k the alternating binomial sum cancels too many digits.
MAX_CLOSED_FORM_K = 40
ML_TOLERANCE = 1e-3


@dataclass(frozen=True, eq=False)
class NormStats:
    rho: np.ndarray
    k: int
    d_ml: float
    degenerate: bool = False
    warnings: list = field(default_factory=list)


def _check_k(k):
    if int(k) != k or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k}")
    return int(k)


def norm_pdf(r, k, d):
    """
    Density g(r; k, d) = k d r^(d-1) (1 - r^d)^(k-1) on [0, 1].
    """
    k = _check_k(k)
    if not 0.0 <= r <= 1.0:
        raise ParameterError(f"r must lie in [0, 1], got {r}")
    if not d >= 1:
        raise ParameterError(f"d must be >= 1, got {d}")
    if r == 0.0:
        return float(k) if d == 1 else 0.0
    return k * d * r ** (d - 1) * (1.0 - r ** d) ** (k - 1)


def _clipped(rho, clip):
    rho = np.asarray(rho, dtype=np.float64)
    return np.minimum(rho, 1.0 - clip)


def log_likelihood(rho, k, d, clip=None):
    """
    ll(d) = N log(kd) + (d - 1) sum log rho + (k - 1) sum log(1 - rho^d).

    Values equal to 1 are moved to 1 - clip first so the last term stays finite.
    """
    k = _check_k(k)
    clip = config.RHO_CLIP if clip is None else clip
    rho = _clipped(rho, clip)
    n = rho.size
    log_rho = np.log(rho)
    return float(
        n * math.log(k * d)
        + (d - 1.0) * log_rho.sum()
        + (k - 1.0) * np.log1p(-np.exp(d * log_rho)).sum()
    )


def fit_ml_dimension(rho, k, d_max, clip=None):
    """
    Continuous maximizer of ll(d) over [1, d_max] (bounded Brent search,
    absolute tolerance 1e-3 in d). Endpoints are compared explicitly so that a
    likelihood monotone in d returns the bound itself.

    :param rho: Normalized distances
    :param k: Neighborhood size
    :param d_max: Upper end of the search interval
    :return: d_ml
    """
    k = _check_k(k)
    if d_max < 1:
        raise ParameterError(f"d_max must be >= 1, got {d_max}")
    rho = np.asarray(rho, dtype=np.float64)
    if rho.size == 0:
        raise ParameterError("rho must be non-empty")
    d_max = float(d_max)
    if d_max == 1.0:
        return 1.0

    def objective(d):
        return -log_likelihood(rho, k, d, clip)

    result = minimize_scalar(objective, bounds=(1.0, d_max), method='bounded',
                             options={'xatol': ML_TOLERANCE})
    candidates = [(objective(1.0), 1.0), (float(result.fun), float(result.x)), (objective(d_max), d_max)]
    best = min(candidates, key=lambda item: (item[0], item[1]))
    return best[1]


def norm_stats(rho, k, d_max, clip=None):
    """
    Fit d_ml and flag the degenerate case where every rho is (numerically) 1.
    """
    clip = config.RHO_CLIP if clip is None else clip
    rho = np.asarray(rho, dtype=np.float64)
    d_ml = fit_ml_dimension(rho, k, d_max, clip)
    degenerate = bool(np.all(rho >= 1.0 - clip))
    warnings = []
    if degenerate:
        message = f"All normalized distances equal 1; d_ml pinned at the search ceiling {d_ml:g}"
        logger.warning(message)
        warnings.append(message)
    return NormStats(rho=rho, k=int(k), d_ml=d_ml, degenerate=degenerate, warnings=warnings)


def kl_norms(d_hat, d_check, k):
    """
    Closed-form KL(g(.; k, d_hat) || g(.; k, d_check)):

        H_k c - 1 - H_{k-1} - log c - (k - 1) sum_{i=0..k} (-1)^i C(k, i) Psi(1 + i / c)

    with c = d_check / d_hat. The alternating sum is accumulated with exact
    compensated summation (math.fsum), terms ordered by descending magnitude.
    """
    k = _check_k(k)
    if d_hat < 1 or d_check < 1:
        raise ParameterError(f"d_hat and d_check must be >= 1, got {d_hat}, {d_check}")
    if k > MAX_CLOSED_FORM_K:
        raise NumericInstabilityError(
            f"Closed-form distance KL is unreliable for k={k} > {MAX_CLOSED_FORM_K}; "
            f"use a quadrature evaluation instead"
        )
    if d_hat == d_check:
        return 0.0
    ratio = d_check / d_hat
    terms = [(-1) ** i * math.comb(k, i) * digamma(1.0 + i * d_hat / d_check) for i in range(k + 1)]
    terms.sort(key=abs, reverse=True)
    alternating = math.fsum(terms)
    harmonic_k_minus_1 = harmonic(k - 1) if k > 1 else 0.0
    value = harmonic(k) * ratio - 1.0 - harmonic_k_minus_1 - math.log(ratio) - (k - 1) * alternating
    if not math.isfinite(value):
        raise NumericInstabilityError(f"Distance KL evaluated to {value} for d_hat={d_hat}, d_check={d_check}, k={k}")
    return max(value, 0.0)


def kl_norms_quadrature(d_hat, d_check, k):
    """
    The same divergence by adaptive quadrature, for k beyond the closed form.

    Substituting s = r^d_hat turns g(.; k, d_hat) into k (1 - s)^(k-1) on
    [0, 1], which keeps the integrand smooth for large k and d.
    """
    k = _check_k(k)
    if d_hat < 1 or d_check < 1:
        raise ParameterError(f"d_hat and d_check must be >= 1, got {d_hat}, {d_check}")
    if d_hat == d_check:
        return 0.0
    ratio = d_check / d_hat
    log_scale = math.log(d_hat / d_check)

    def integrand(s):
        if s <= 0.0 or s >= 1.0:
            return 0.0
        log_ratio = log_scale + (1.0 - ratio) * math.log(s) + (k - 1) * (math.log1p(-s) - math.log1p(-s ** ratio))
        return k * (1.0 - s) ** (k - 1) * log_ratio

    value, error = quad(integrand, 0.0, 1.0, epsabs=1e-10, epsrel=1e-10, limit=200)
    if not math.isfinite(value):
        raise NumericInstabilityError(f"Distance KL quadrature failed for d_hat={d_hat}, d_check={d_check}, k={k}")
    logger.debug(f"Quadrature KL k={k}, d_hat={d_hat:.4f}, d_check={d_check:.4f}: {value:.6g} (+/- {error:.1e})")
    return max(value, 0.0)
