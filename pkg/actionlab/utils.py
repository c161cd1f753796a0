import os
import logging
from logging.handlers import RotatingFileHandler
from typing import Optional

from dotenv import load_dotenv

LOG_FORMAT = '%(asctime)s [%(levelname)s] %(message)s'


def load_environment(env_file: Optional[str] = None) -> None:
    load_dotenv(env_file or os.path.join(os.path.dirname(__file__), '../env/.env'))
    logging.info("Environment variables loaded.")


def setup_logging(log_dir: str, level: str = "INFO") -> None:
    """Rotating log file (1MB per file, keep 5 backups) plus warnings on the console."""
    os.makedirs(log_dir, exist_ok=True)
    log_file = os.path.join(log_dir, 'actionlab.log')
    handler = RotatingFileHandler(log_file, maxBytes=1_048_576, backupCount=5)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))

    console = logging.StreamHandler()
    console.setLevel(logging.WARNING)
    console.setFormatter(logging.Formatter('[%(levelname)s] %(message)s'))

    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.addHandler(console)
    root.setLevel(getattr(logging, level.upper(), logging.INFO))
