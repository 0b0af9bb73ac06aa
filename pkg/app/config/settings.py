import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Default interval
DEFAULT_A = float(os.getenv("SPLINE_DEFAULT_A", "-1.0"))
DEFAULT_B = float(os.getenv("SPLINE_DEFAULT_B", "1.0"))

# Sampling settings
DEFAULT_GRID = int(os.getenv("SPLINE_GRID", "64"))  # points per partition interval
MODULUS_STEPS = int(os.getenv("SPLINE_MODULUS_STEPS", "64"))
MODULUS_SHIFTS = int(os.getenv("SPLINE_MODULUS_SHIFTS", "512"))
SCREEN_SAMPLES = int(os.getenv("SPLINE_SCREEN_SAMPLES", "2000"))
LEMMA1_TRIALS = int(os.getenv("SPLINE_LEMMA1_TRIALS", "10000"))
LEMMA1_WINDOW_GRID = int(os.getenv("SPLINE_LEMMA1_WINDOW_GRID", "256"))

# Tolerances
MONOTONE_TOL = float(os.getenv("SPLINE_MONOTONE_TOL", "1e-9"))
EQUIDISTANT_RTOL = float(os.getenv("SPLINE_EQUIDISTANT_RTOL", "1e-12"))
NODE_SEPARATION_RTOL = float(os.getenv("SPLINE_NODE_SEPARATION_RTOL", "1e-13"))
ADMISSIBILITY_RTOL = float(os.getenv("SPLINE_ADMISSIBILITY_RTOL", "1e-12"))
REPRESENTATION_RTOL = float(os.getenv("SPLINE_REPRESENTATION_RTOL", "1e-9"))
# Delta_j values closer than DELTA_TIE_FACTOR * eps * max|f(x_j)| / min h^3 are ties
DELTA_TIE_FACTOR = float(os.getenv("SPLINE_DELTA_TIE_FACTOR", "64"))

# Empirical constant pinned for ||f - s|| <= C * omega_4(f, h)
ERROR_CONSTANT_ENVELOPE = float(os.getenv("SPLINE_ERROR_CONSTANT", "50.0"))

# Reproducibility
DEFAULT_SEED = int(os.getenv("SPLINE_SEED", "20240917"))

# Output settings
CSV_FLOAT_FORMAT = "%.17g"
SWEEP_WORKERS = int(os.getenv("SPLINE_SWEEP_WORKERS", "4"))

# Logging settings
LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING")
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
