import logging
import os
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class Settings:
    """Process-wide settings read once from the environment"""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(Settings, cls).__new__(cls)
            cls._instance._load()
        return cls._instance

    def _load(self) -> None:
        self.results_dir = os.environ.get("MIBOOT_RESULTS_DIR", "results")
        self.oracle_dir = os.environ.get(
            "MIBOOT_ORACLE_DIR", os.path.join(self.results_dir, "oracles")
        )
        self.log_level = os.environ.get("MIBOOT_LOG_LEVEL", "INFO").upper()
        self.thread_budget = int(os.environ.get("MIBOOT_THREAD_BUDGET", "1"))
        self.em_tol = float(os.environ.get("MIBOOT_EM_TOL", "1e-8"))
        self.em_max_iter = int(os.environ.get("MIBOOT_EM_MAX_ITER", "1000"))
        self.em_ridge = float(os.environ.get("MIBOOT_EM_RIDGE", "1e-8"))

        if self.thread_budget < 1:
            raise ValueError("MIBOOT_THREAD_BUDGET must be at least 1")

    @classmethod
    def reload(cls) -> "Settings":
        """Re-read the environment (tests patch variables and call this)"""
        cls._instance = None
        return cls()


def configure_logging(level: Optional[str] = None) -> None:
    level_name = (level or Settings().log_level).upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO), format=LOG_FORMAT)
    logging.getLogger("src").setLevel(getattr(logging, level_name, logging.INFO))
