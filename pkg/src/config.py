"""Configuration and constants for the polymerlab simulation library."""

import logging
import os
from typing import Optional


def _env_int(name: str, default: int) -> int:
    """Read a positive integer from the environment, falling back to default."""
    raw: Optional[str] = os.getenv(name)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        return default
    return value if value > 0 else default


# Parallelism
DEFAULT_WORKERS = _env_int("POLYMERLAB_THREADS", 1)

# Logging
LOG_LEVEL_NAME = os.getenv("POLYMERLAB_LOG_LEVEL", "WARNING").upper()
DEFAULT_LOG_LEVEL = getattr(logging, LOG_LEVEL_NAME, logging.WARNING)

# Resource guards
MAX_SLAB_N_HIGH_DIM = _env_int("POLYMERLAB_MAX_SLAB_N_HIGH_DIM", 48)
MAX_BRUTEFORCE_PATHS = 10**7
MAX_SUBSET_POINTS = 20
MAX_CHAOS_SUBSET_SITES = 25
MAX_BRIDGE_QUADRATURE_DIM = 4

# Continuum window
DEFAULT_WINDOW_L = 6.0

# Numerics
QUADRATURE_RTOL = 1e-10
PSI_QUADRATURE_RTOL = 1e-8
GAUSS_HERMITE_NODES = 24
GAUSS_JACOBI_NODES = 6
KS_BOOTSTRAP_RESAMPLES = 200
COMPARISON_CALIBRATION_MARGIN = 1.25

# Output
CSV_SCHEMA_VERSION = 2
SLAB_MAGIC = b"PLSLAB"
SLAB_FORMAT_VERSION = 1


# Error Codes
class ErrorCode:
    """Standardized error codes for consistent error handling."""
    CONFIG_INVALID = "CONFIG_INVALID"
    DOMAIN_ERROR = "DOMAIN_ERROR"
    RESOURCE_GUARD = "RESOURCE_GUARD"
    DEGENERATE = "DEGENERATE"
    UNSUPPORTED_FUNCTIONAL = "UNSUPPORTED_FUNCTIONAL"
    IO_ERROR = "IO_ERROR"
    INTERNAL_ERROR = "INTERNAL_ERROR"


_EXIT_CODES = {
    ErrorCode.CONFIG_INVALID: 2,
    ErrorCode.DOMAIN_ERROR: 2,
    ErrorCode.UNSUPPORTED_FUNCTIONAL: 2,
    ErrorCode.RESOURCE_GUARD: 3,
    ErrorCode.DEGENERATE: 4,
}


def exit_code_for(code: str) -> int:
    """Map an error code to the process exit status."""
    return _EXIT_CODES.get(code, 1)


def alpha_critical(d: int) -> float:
    """Critical tail exponent min(1 + 2/d, 2) below which the continuum polymer exists."""
    return min(1.0 + 2.0 / d, 2.0)
