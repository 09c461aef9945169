"""
Scalar special functions used by the closed-form divergences.

Modified Bessel functions are evaluated through the exponentially scaled
``scipy.special.ive`` so that ``log I_v(x) = log(ive(v, x)) + x`` stays finite
for arguments far beyond the double-precision overflow of ``I_0`` (x ~ 700).
"""

import math
import logging

import numpy as np
from scipy import special

from src.errors import ParameterError

# Get logger for this module
logger = logging.getLogger(__name__)

EULER_GAMMA = 0.57721566490153286060651209008240243

# Returned by log_bessel_i(1, 0) since I_1(0) = 0.
LOG_ZERO = -math.inf

_SUPPORTED_ORDERS = (0, 1)


def _check_argument(x, name='x'):
    if not math.isfinite(x) or x < 0:
        raise ParameterError(f"{name} must be a finite non-negative real, got {x}")


def log_bessel_i(order, x):
    """
    Natural logarithm of the modified Bessel function of the first kind.

    :param order: 0 or 1
    :param x: Finite non-negative argument
    :return: ln I_order(x); LOG_ZERO for order 1 at x = 0
    """
    if order not in _SUPPORTED_ORDERS:
        raise ParameterError(f"Unsupported Bessel order {order}; expected one of {_SUPPORTED_ORDERS}")
    x = float(x)
    _check_argument(x)
    if x == 0.0:
        return 0.0 if order == 0 else LOG_ZERO
    return float(np.log(special.ive(order, x)) + x)


def bessel_ratio_A(x):
    """
    Ratio A(x) = I_1(x) / I_0(x), strictly increasing from A(0) = 0 towards 1.

    The exponential scaling cancels in the ratio, so no overflow occurs.
    """
    x = float(x)
    _check_argument(x)
    if x == 0.0:
        return 0.0
    return float(special.ive(1, x) / special.ive(0, x))


def digamma(x):
    """
    Digamma function Psi(x) for x > 0.

    :param x: Positive real
    :return: Psi(x)
    """
    x = float(x)
    if not math.isfinite(x) or x <= 0:
        raise ParameterError(f"digamma is only defined here for x > 0, got {x}")
    return float(special.digamma(x))


def harmonic(k):
    """
    k-th harmonic number H_k, summed in ascending order of i (1 + 1/2 + ... + 1/k).

    :param k: Positive integer
    :return: H_k
    """
    if int(k) != k or k < 1:
        raise ParameterError(f"harmonic number requires a positive integer, got {k}")
    total = 0.0
    for i in range(1, int(k) + 1):
        total += 1.0 / i
    return total
