import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Model defaults (dimensionless, scaled by leg length L and tau = sqrt(L/g))
WALKER_MU = float(os.getenv("WALKER_MU", "0.1"))
WALKER_KP = float(os.getenv("WALKER_KP", "10.0"))
WALKER_KD = float(os.getenv("WALKER_KD", "1.0"))
WALKER_GAMMA = float(os.getenv("WALKER_GAMMA", "0.3"))
WALKER_STRIDE_ANGLE = float(os.getenv("WALKER_STRIDE_ANGLE", "0.3"))
WALKER_PHASE_RESET = os.getenv("WALKER_PHASE_RESET", "True").lower() == "true"

# Simulation Configuration
SIM_REL_TOL = float(os.getenv("SIM_REL_TOL", "1e-10"))
SIM_ABS_TOL = float(os.getenv("SIM_ABS_TOL", "1e-12"))
SIM_EVENT_TOL = float(os.getenv("SIM_EVENT_TOL", "1e-10"))
SIM_MAX_STRIDE_TIME = float(os.getenv("SIM_MAX_STRIDE_TIME", "10.0"))
SIM_SAMPLE_DT = float(os.getenv("SIM_SAMPLE_DT", "1e-3"))
SIM_MAX_STEP = float(os.getenv("SIM_MAX_STEP", "0.05"))

# Fixed-point solver Configuration
SOLVER_TOL = float(os.getenv("SOLVER_TOL", "1e-10"))
SOLVER_MAX_ITER = int(os.getenv("SOLVER_MAX_ITER", "50"))

# Application Configuration
DEBUG = os.getenv("DEBUG", "False").lower() == "true"
LOG_LEVEL = os.getenv("LOG_LEVEL", "DEBUG" if DEBUG else "INFO").upper()
RESULTS_DIR = os.getenv("RESULTS_DIR", "results")
SWEEP_WORKERS = int(os.getenv("SWEEP_WORKERS", "1"))

WOBBLEWALK_VERSION = "0.4.0"
