"""
Logging configuration for the pixel offline-RL bench.

Every module logs under the `pobench` namespace; `bench.py` installs the
console handler once per invocation and can mirror a run into a log file
next to its checkpoint.
"""
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Union

LOGGER_NAMESPACE = 'pobench'
LOG_FORMAT = '[%(levelname)-8s] %(name)s: %(message)s'
FILE_FORMAT = '%(asctime)s ' + LOG_FORMAT


def _level(level: Union[int, str]) -> int:
    if isinstance(level, str):
        value = logging.getLevelName(level.upper())
        if not isinstance(value, int):
            raise ValueError(f"Unknown log level '{level}'")
        return value
    return level


def setup_logging(level: Union[int, str] = logging.INFO) -> logging.Logger:
    """
    Configure the bench's console logging.

    Args:
        level: Logging level or its name ("DEBUG", "INFO", ...)

    Returns:
        The namespace logger
    """
    logger = logging.getLogger(LOGGER_NAMESPACE)
    logger.setLevel(_level(level))

    # Remove existing handlers
    for handler in list(logger.handlers):
        logger.removeHandler(handler)

    handler = logging.StreamHandler(sys.stdout)
    handler.setLevel(_level(level))
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)

    return logger


@contextmanager
def log_to_file(path: Union[str, Path]) -> Iterator[Path]:
    """Mirror everything the bench logs into `path` while the block runs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    logger = logging.getLogger(LOGGER_NAMESPACE)
    handler = logging.FileHandler(path, mode='w', encoding='utf-8')
    handler.setLevel(logger.level or logging.INFO)
    handler.setFormatter(logging.Formatter(FILE_FORMAT))
    logger.addHandler(handler)
    try:
        yield path
    finally:
        logger.removeHandler(handler)
        handler.close()


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance for a bench area.

    Args:
        name: Area name, e.g. "cli" or "data.collect"
    """
    return logging.getLogger(f'{LOGGER_NAMESPACE}.{name}')
