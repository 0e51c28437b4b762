"""
Logging setup. Library modules call get_logger(__name__); the CLI calls
configure_logging once. Output goes to stderr through rich.
"""

import logging
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

ROOT_LOGGER = "manifold_geodesics"

_configured = False


def configure_logging(level: Optional[str] = None, force: bool = False) -> logging.Logger:
    """Attach a RichHandler on stderr to the package logger.

    Args:
        level: Level name (DEBUG, INFO, ...); defaults to config.LOG_LEVEL
        force: Replace an existing handler

    Returns:
        The package root logger
    """
    global _configured
    from .config import config

    logger = logging.getLogger(ROOT_LOGGER)
    if _configured and not force:
        if level:
            logger.setLevel(level.upper())
        return logger

    for handler in list(logger.handlers):
        logger.removeHandler(handler)

    handler = RichHandler(
        console=Console(stderr=True),
        show_path=False,
        rich_tracebacks=True,
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel((level or config.LOG_LEVEL).upper())
    logger.propagate = False
    _configured = True
    return logger


def get_logger(name: str) -> logging.Logger:
    """Return a child of the package logger."""
    if not name.startswith(ROOT_LOGGER):
        name = f"{ROOT_LOGGER}.{name}"
    return logging.getLogger(name)
