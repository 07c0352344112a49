"""
Configuration module for CarbonShift.
"""

import logging
import os
import platform
from pathlib import Path

# Application settings
APP_NAME = "CarbonShift"
VERSION = "0.1.0"
DEBUG = os.getenv("DEBUG", "false").lower() == "true"

# Paths
BASE_DIR = Path(__file__).parent.parent
LOGS_DIR = Path(os.getenv("CARBONSHIFT_LOGS_DIR", BASE_DIR / "logs"))
DATA_DIR = Path(os.getenv("CARBONSHIFT_DATA_DIR", BASE_DIR / "data"))
RTS_GMLC_DIR = DATA_DIR / "rts_gmlc"

# Logging configuration
LOG_LEVEL = getattr(logging, os.getenv("LOG_LEVEL", "DEBUG" if DEBUG else "INFO").upper(), logging.INFO)
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_FILE = LOGS_DIR / "carbonshift.log"


def setup_logging(level: int | None = None) -> logging.Logger:
    """Configure application logging.

    Console output goes to stderr so that CSV/JSON written to stdout by the
    CLI stays machine-readable.
    """
    level = level if level is not None else LOG_LEVEL
    formatter = logging.Formatter(LOG_FORMAT)
    handlers: list[logging.Handler] = []

    try:
        LOGS_DIR.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(LOG_FILE, encoding='utf-8')
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        handlers.append(file_handler)
    except OSError:
        pass  # read-only checkout: console logging only

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    handlers.append(console_handler)

    if platform.system() == "Windows":
        try:
            import sys
            if hasattr(sys.stderr, 'reconfigure'):
                sys.stderr.reconfigure(encoding='utf-8')
        except (OSError, AttributeError, LookupError):
            pass

    logging.basicConfig(level=level, handlers=handlers, format=LOG_FORMAT, force=True)

    # Third-party loggers stay quiet unless explicitly asked for.
    third_party_level = os.getenv("THIRD_PARTY_LOG_LEVEL", "WARNING").upper()
    for logger_name in ("httpx", "httpcore", "urllib3"):
        logging.getLogger(logger_name).setLevel(getattr(logging, third_party_level, logging.WARNING))

    logger = logging.getLogger("carbonshift")
    logger.debug(f"{APP_NAME} v{VERSION} - Logging initialized (file: {LOG_FILE})")
    return logger


# ---------------------------------------------------------------------------
# Numerical tolerances
# ---------------------------------------------------------------------------

# Absolute tolerance on constraint residuals (primal feasibility).
FEASIBILITY_TOL = 1e-7
# Tolerance on the sign of constraint multipliers (dual feasibility).
OPTIMALITY_TOL = 1e-8
# Smallest admissible pivot / direction component in the ratio test.
PIVOT_TOL = 1e-9
# Bases with a 2-norm condition estimate above this are rejected.
CONDITION_LIMIT = 1e12
# Relative residual bound for basis back-solves.
RESIDUAL_TOL = 1e-8
# Simplex iteration cap, as a multiple of (variables + constraints).
MAX_ITERATION_FACTOR = 50
# Consecutive zero-length steps before switching to Bland's rule.
DEGENERATE_STEP_LIMIT = 50

# ---------------------------------------------------------------------------
# Market and fleet defaults
# ---------------------------------------------------------------------------

DEFAULT_RHO = float(os.getenv("CARBONSHIFT_RHO", 30.0))  # $/tCO2
DEFAULT_EPSILON = 0.05
DEFAULT_TRANSFER_CAP = 400.0  # MW
DEFAULT_SHIFT_COST = 0.0  # $/MWh
DEFAULT_NOISE_MAGNITUDE = 1e-3  # $/MWh
DEFAULT_NOISE_SEED = 0
DEFAULT_FD_DELTA = 0.1  # MW

# tCO2/MWh per fuel. Fuels not listed emit nothing.
EMISSION_FACTORS = {
    "oil": 0.7434,
    "gas": 0.9606,
    "coal": 0.6042,
}

# Fuels whose unused capacity counts as curtailment.
CURTAILABLE_FUELS = ("wind", "solar")

# Relative deviation above which a predicted generation change is flagged
# against the re-solved one.
PREDICTION_DEVIATION_TOL = 0.05

# RTS-GMLC source data (GridMod/RTS-GMLC on GitHub).
RTS_GMLC_BASE_URL = os.getenv(
    "RTS_GMLC_BASE_URL",
    "https://raw.githubusercontent.com/GridMod/RTS-GMLC/master/RTS_Data/SourceData",
)
RTS_GMLC_BASE_MVA = 100.0
RTS_GMLC_DOWNLOAD_TIMEOUT = float(os.getenv("RTS_GMLC_DOWNLOAD_TIMEOUT", 30.0))
