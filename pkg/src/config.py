import os
import logging
from dotenv import load_dotenv

from src.errors import ParameterError

# Get logger for this module
logger = logging.getLogger(__name__)

# Load environment variables
load_dotenv()


def _int_env(name, default):
    raw = os.getenv(name)
    if raw is None or raw == '':
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer value for {name}: {raw!r}; using {default}")
        return default


def _float_env(name, default):
    raw = os.getenv(name)
    if raw is None or raw == '':
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"Ignoring non-numeric value for {name}: {raw!r}; using {default}")
        return default


# Neighborhood sizes (synthetic and real-data presets)
DEFAULT_K = _int_env('DANCO_K', 10)
REAL_DATA_K = _int_env('DANCO_REAL_K', 5)

# Levina-Bickel neighborhood range
MLE_K1 = _int_env('DANCO_MLE_K1', 6)
MLE_K2 = _int_env('DANCO_MLE_K2', 20)
REAL_MLE_K1 = 3
REAL_MLE_K2 = 8

# Calibration
CALIBRATION_N = _int_env('DANCO_CALIBRATION_N', 2500)
CALIBRATION_REPS = _int_env('DANCO_CALIBRATION_REPS', 1)
CALIBRATION_CACHE = os.getenv('DANCO_CALIBRATION_CACHE') or None
DEFAULT_SEED = _int_env('DANCO_SEED', 0)

# Numerical guards
TAU_CAP = _float_env('DANCO_TAU_CAP', 1e5)
ANGLE_EPS = _float_env('DANCO_ANGLE_EPS', 1e-12)
RHO_CLIP = _float_env('DANCO_RHO_CLIP', 1e-9)
NEAR_TIE_GAP = 1e-6
BRUTE_FORCE_DIM = _int_env('DANCO_BRUTE_FORCE_DIM', 15)

# Parallelism and benchmark scale
WORKERS = max(1, _int_env('DANCO_WORKERS', 1))
BENCH_INSTANCES = _int_env('DANCO_BENCH_INSTANCES', 5)
FULL_BENCH_INSTANCES = 20

PRESETS = {
    'synthetic': {'k': DEFAULT_K, 'k1': MLE_K1, 'k2': MLE_K2},
    'real': {'k': REAL_DATA_K, 'k1': REAL_MLE_K1, 'k2': REAL_MLE_K2},
}


def preset(name):
    """
    Return the parameter preset for 'synthetic' or 'real' data.

    :param name: Preset name
    :return: dict with keys k, k1, k2
    """
    try:
        return dict(PRESETS[name])
    except KeyError:
        raise ParameterError(f"Unknown preset {name!r}; expected one of {sorted(PRESETS)}")
