"""Logging setup shared by the CLI and the test-suite."""
import logging
from typing import Optional

from pythonjsonlogger import jsonlogger

from app.core.config import settings

PLAIN_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_handler: Optional[logging.Handler] = None


def setup_logging(level: Optional[str] = None, fmt: Optional[str] = None) -> logging.Handler:
    """
    Install the toolkit's root handler, replacing the one from a previous call.

    Args:
        level: Log level name; defaults to settings.log_level
        fmt: "plain" or "json"; defaults to settings.log_format

    Returns:
        The installed handler
    """
    global _handler
    level = (level or settings.log_level).upper()
    fmt = fmt or settings.log_format

    handler = logging.StreamHandler()
    if fmt == "json":
        handler.setFormatter(
            jsonlogger.JsonFormatter("%(asctime)s %(name)s %(levelname)s %(message)s")
        )
    else:
        handler.setFormatter(logging.Formatter(PLAIN_FORMAT))

    root = logging.getLogger()
    if _handler is not None:
        root.removeHandler(_handler)
    root.addHandler(handler)
    root.setLevel(level)
    _handler = handler
    return handler
