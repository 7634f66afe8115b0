import os

from dotenv import load_dotenv

load_dotenv(
    "config.env" if os.path.isfile("config.env") else "sample_config.env"
)

# Discretization
GRID_NODES = int(os.environ.get("GRID_NODES", 201))  # uniform nodes on [0, T]

# Feasibility and certification tolerances
TOL_EQ = float(os.environ.get("TOL_EQ", "1e-8"))
TOL_INEQ = float(os.environ.get("TOL_INEQ", "1e-8"))
TOL_SIGN = float(os.environ.get("TOL_SIGN", "1e-8"))  # v_j >= -TOL_SIGN
K_MIN = float(os.environ.get("K_MIN", "1e-8"))  # floor for the Gram infimum
EPS_ACT_REL = float(os.environ.get("EPS_ACT_REL", "1e-6"))  # times (1 + g-scale)
TOL_STAT_REL = float(os.environ.get("TOL_STAT_REL", "1e-7"))  # times (1 + K_phi)
TOL_PSD_REL = float(os.environ.get("TOL_PSD_REL", "1e-8"))  # times (1 + |H|)
SOC_SAMPLES = int(os.environ.get("SOC_SAMPLES", 100))

# Pointwise solver
SEED = int(os.environ.get("SEED", 0))
STARTS = int(os.environ.get("STARTS", 16))
START_BOX = float(os.environ.get("START_BOX", "5.0"))
AL_PENALTY0 = float(os.environ.get("AL_PENALTY0", "10"))
AL_GROWTH = float(os.environ.get("AL_GROWTH", "10"))
AL_OUTER = int(os.environ.get("AL_OUTER", 8))
INNER_GTOL = float(os.environ.get("INNER_GTOL", "1e-10"))
SOLVER_TOL_FEAS = float(os.environ.get("SOLVER_TOL_FEAS", "1e-8"))

# Refutation line search
LS_SIGMA0 = float(os.environ.get("LS_SIGMA0", "1.0"))
LS_HALVINGS = int(os.environ.get("LS_HALVINGS", 30))
TOL_GAIN = float(os.environ.get("TOL_GAIN", "1e-10"))

# Logging
LOG_FILE = os.environ.get("LOG_FILE", "ctkkt.log")
SAVE_LOG = os.environ.get("SAVE_LOG", "False").lower() in ["true", "1"]
