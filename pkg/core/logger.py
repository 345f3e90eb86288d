"""Logging system for unmix"""
import logging
import os
import sys
from typing import Optional

from colorama import Fore, Style, init

init(autoreset=True)

LOG_ENV_VAR = "UNMIX_LOG"


class ColoredFormatter(logging.Formatter):
    """Custom formatter with colors"""

    COLORS = {
        'DEBUG': Fore.CYAN,
        'INFO': Fore.GREEN,
        'WARNING': Fore.YELLOW,
        'ERROR': Fore.RED,
        'CRITICAL': Fore.RED + Style.BRIGHT
    }

    def format(self, record):
        # Work on a copy so other handlers see the plain level name
        record = logging.makeLogRecord(record.__dict__)
        levelname = record.levelname
        if levelname in self.COLORS:
            record.levelname = f"{self.COLORS[levelname]}{levelname}{Style.RESET_ALL}"
        return super().format(record)


def level_from_env(default: int = logging.INFO) -> int:
    """Read the log level from UNMIX_LOG (name or number)"""
    raw = os.getenv(LOG_ENV_VAR, "").strip()
    if not raw:
        return default
    if raw.isdigit():
        return int(raw)
    level = logging.getLevelName(raw.upper())
    return level if isinstance(level, int) else default


def resolve_level(verbose: bool = False, quiet: bool = False) -> int:
    """CLI flags win over the environment"""
    if quiet:
        return logging.ERROR
    if verbose:
        return logging.DEBUG
    return level_from_env()


def setup_logger(name: str = "unmix", level: Optional[int] = None) -> logging.Logger:
    """Setup and return logger"""
    if level is None:
        level = level_from_env()

    logger = logging.getLogger(name)
    logger.setLevel(level)

    # Console handler
    if not logger.handlers:
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setFormatter(ColoredFormatter('%(levelname)s - %(message)s'))
        logger.addHandler(console_handler)

    for handler in logger.handlers:
        handler.setLevel(level)

    return logger


# Global logger instance
logger = setup_logger()
