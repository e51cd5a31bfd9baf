import os
import sys

from loguru import logger

from config import settings

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | "
    "<cyan>{extra[name]}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {extra[name]}:{function}:{line} - {message}"


def configure_logging(level: str | None = None, log_dir: str | None = None) -> str:
    """
    Replace all loguru sinks with the stderr, run-log and error-log sinks.

    Args:
        level (str | None): Console and run-log level, ``settings.LOG_LEVEL`` when None.
        log_dir (str | None): Directory for the rotating files, ``settings.LOG_DIR`` when None.
            An empty string disables the file sinks.

    Returns:
        str: The level in effect.
    """
    level = (level or settings.LOG_LEVEL).upper()
    log_dir = settings.LOG_DIR if log_dir is None else log_dir

    logger.remove()
    logger.configure(extra={"name": settings.APP_NAME})
    logger.add(sys.stderr, format=CONSOLE_FORMAT, level=level, colorize=True)

    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        logger.add(
            os.path.join(log_dir, f"{settings.APP_NAME}.log"),
            rotation="10 MB",
            retention="1 week",
            compression="zip",
            format=FILE_FORMAT,
            level=level,
        )
        # Errors are kept longer than the run log
        logger.add(
            os.path.join(log_dir, "errors.log"),
            rotation="10 MB",
            retention="1 month",
            compression="zip",
            format=FILE_FORMAT,
            level="ERROR",
        )
    return level


def get_logger(name):
    """
    Get a logger with the given name.

    Args:
        name (str): The name of the logger.

    Returns:
        logger: A logger instance with the given name.
    """
    return logger.bind(name=name)


LOG_LEVEL = configure_logging()
get_logger(settings.APP_NAME).debug(f"Logging initialized at level {LOG_LEVEL}")

__all__ = ["configure_logging", "get_logger"]
