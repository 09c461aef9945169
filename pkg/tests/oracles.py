"""Independent reference computations used by the tests."""

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import i0e


def norm_log_pdf(r, k, d):
    return math.log(k * d) + (d - 1) * math.log(r) + (k - 1) * math.log1p(-r ** d)


def kl_norms_by_quadrature(d_hat, d_check, k):
    """
    KL(g(.; k, d_hat) || g(.; k, d_check)) integrated in r directly, split at
    the mode so the sharp peak for large d is resolved.
    """
    def integrand(r):
        if r <= 0.0 or r >= 1.0:
            return 0.0
        log_p = norm_log_pdf(r, k, d_hat)
        return math.exp(log_p) * (log_p - norm_log_pdf(r, k, d_check))

    mode = ((d_hat - 1.0) / (k * d_hat - 1.0)) ** (1.0 / d_hat) if d_hat > 1 else 0.5
    points = sorted({0.5, min(max(mode, 1e-6), 1 - 1e-6)})
    value, _ = quad(integrand, 0.0, 1.0, points=points, epsabs=1e-12, epsrel=1e-10, limit=500)
    return value


def vm_log_pdf(theta, nu, tau):
    return tau * math.cos(theta - nu) - math.log(2.0 * math.pi) - (math.log(i0e(tau)) + tau)


def kl_vonmises_by_quadrature(nu1, tau1, nu2, tau2):
    def integrand(theta):
        log_p = vm_log_pdf(theta, nu1, tau1)
        return math.exp(log_p) * (log_p - vm_log_pdf(theta, nu2, tau2))

    peak = math.atan2(math.sin(nu1), math.cos(nu1))
    points = [peak] if -math.pi < peak < math.pi else None
    value, _ = quad(integrand, -math.pi, math.pi, points=points, epsabs=1e-13, epsrel=1e-12, limit=500)
    return value


def sample_vonmises(nu, tau, size, rng):
    """Rejection sampler with a uniform proposal on [-pi, pi]."""
    accepted = []
    while sum(len(chunk) for chunk in accepted) < size:
        theta = rng.uniform(-math.pi, math.pi, size)
        keep = rng.uniform(0.0, 1.0, size) < np.exp(tau * (np.cos(theta - nu) - 1.0))
        accepted.append(theta[keep])
    return np.concatenate(accepted)[:size]


def sample_norm_distance(k, d, size, rng):
    """Inverse-CDF draw from g(.; k, d): G(r) = 1 - (1 - r^d)^k."""
    u = rng.uniform(0.0, 1.0, size)
    return (1.0 - (1.0 - u) ** (1.0 / k)) ** (1.0 / d)


def brute_force_neighbors(points, k):
    """(k+1) nearest neighbors by full distance matrix, ties broken by index."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    ids = np.empty((n, k + 1), dtype=np.int64)
    dists = np.empty((n, k + 1))
    for i in range(n):
        dist = np.sqrt(((points - points[i]) ** 2).sum(axis=1))
        dist[i] = np.inf
        order = np.lexsort((np.arange(n), dist))[:k + 1]
        ids[i] = order
        dists[i] = dist[order]
    return ids, dists
