# Pull up imports at the package level for convenience
# The user can now say: from fitosim import load_config, run
from .config import ExperimentConfig, load_config
from .errors import FitoSimError, ConfigError
from .pool import SweepPool
from .simulation import execute, run, run_paired

__version__ = '1.0.0'
