"""Configuration for the leafspace engine."""

import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

ENGINE_VERSION = "1.0.0"

# Numerics
DEFAULT_TOL = float(os.getenv("LEAFSPACE_TOL", "1e-8"))
QUAD_BUDGET = int(os.getenv("LEAFSPACE_QUAD_BUDGET", str(10**7)))
QUAD_SUBINTERVAL_LIMIT = int(os.getenv("LEAFSPACE_QUAD_LIMIT", "200"))

# Sampling
DEFAULT_SEED = int(os.getenv("LEAFSPACE_SEED", "0"))
VALIDATION_SAMPLES = 25
RESIDUAL_SAMPLES = 10
CUBE_PATH_SAMPLES = 50

# Audit thresholds
CONSISTENCY_TOL = 1e-9
CONTAINMENT_TOL = 1e-12

# Pass thresholds
RESIDUAL_THRESHOLD = 1e-6
VANISHING_THRESHOLD = 1e-10
COLLAPSE_THRESHOLD = 1e-5
COCYCLE_THRESHOLD = 1e-4
VALUE_THRESHOLD = 1e-6

# Scenario ranges
MAX_CODIMENSION = 4
MAX_DEGREE = 12

# Observability
LOG_LEVEL = os.getenv("LEAFSPACE_LOG_LEVEL", "WARNING")
TRACE_EXPORTER = os.getenv("LEAFSPACE_TRACE_EXPORTER", "none")

# Bundled fixtures
SCENARIO_DIR = os.getenv(
    "LEAFSPACE_SCENARIO_DIR",
    os.path.join(os.path.dirname(os.path.abspath(__file__)), "scenarios"),
)
