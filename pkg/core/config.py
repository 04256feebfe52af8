import os
from dotenv import load_dotenv

load_dotenv()

OUT_DIR = os.getenv("RADREACT_OUT_DIR", "runs")
LOG_LEVEL = os.getenv("RADREACT_LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("RADREACT_LOG_FILE") or None
MAX_WORKERS = int(os.getenv("RADREACT_MAX_WORKERS", "4"))
DEFAULT_TOL = float(os.getenv("RADREACT_DEFAULT_TOL", "1e-10"))
NOISE_BLOCK = int(os.getenv("RADREACT_NOISE_BLOCK", "4096"))  # steps per generated block
