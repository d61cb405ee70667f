import os
from pathlib import Path

# Base directories
PROJECT_ROOT = Path(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = Path(os.environ.get("COUPLEMAN_DATA_DIR", PROJECT_ROOT / "data"))
RESULTS_DIR = DATA_DIR / "results"
DB_PATH = DATA_DIR / "runs.db"

ENGINE_VERSION = "1.0.0"

# Seeds
DEFAULT_SEED = int(os.environ.get("COUPLEMAN_SEED", "20240917"))

# Chart geometry
BOUNDARY_GUARD = 1e-9  # states with |x| >= 1 - BOUNDARY_GUARD are faults, never clamped

# Time stepping
DT_DISK = 1e-3
DT_H2C = 2.5e-4  # near-boundary starts on the complex ball
DT_RADIAL = 1e-3

# Coupling detection
EPS_COUPLE_DISK = 1e-3  # hyperbolic distance
EPS_COUPLE_H2C = 5e-3  # Euclidean distance
MIRROR_SYNC_FACTOR = 10  # disk mirror falls back to synchronous below MIRROR_SYNC_FACTOR * eps

# Noise streams
BLOCK_PATHS = 512  # lanes per noise block; changing it changes every simulated number
CHUNK_STEPS = 256  # steps of noise drawn at once; has no effect on results

# Estimation
WILSON_Z = 1.96
SE_MULTIPLIER = 3.0  # tolerance band used by pass/fail checks

# Comparison diffusions
WANG_GRID_POINTS = 256
WANG_GRID_SPAN = 1e4
ENTRANCE_SWITCH_FACTOR = 10.0  # r_switch = factor * sqrt(sigma2 * dt)

# Reporting
FLOAT_DIGITS = 17

# Logging settings
LOG_LEVEL = "INFO"  # DEBUG, INFO, WARNING, ERROR, CRITICAL
LOG_FILE_SIZE = 10 * 1024 * 1024  # 10 MB
LOG_FILE_COUNT = 5  # Number of backup log files

# Ensure directories exist
DATA_DIR.mkdir(parents=True, exist_ok=True)
RESULTS_DIR.mkdir(exist_ok=True)

# Make logs directory
LOGS_DIR = DATA_DIR / "logs"
LOGS_DIR.mkdir(exist_ok=True)
