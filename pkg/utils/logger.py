"""
Project logger with color-coded console output and file logging.
"""
import logging
import sys
from pathlib import Path
from typing import Iterable, Optional

import colorlog

from config import settings

FILE_FORMAT = "%(asctime)s [%(levelname)-8s] %(name)s - %(message)s (%(filename)s:%(lineno)d)"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


class SimulationLogger:
    """Logger factory for the simulation framework with color support."""

    _loggers: dict[str, logging.Logger] = {}
    _shared_handlers: list[logging.Handler] = []
    _file_handler: Optional[logging.Handler] = None

    @classmethod
    def get_logger(cls, name: str = "fednia") -> logging.Logger:
        """
        Get or create a logger instance.

        Args:
            name: Logger name

        Returns:
            Configured logger instance
        """
        if name in cls._loggers:
            return cls._loggers[name]

        logger = logging.getLogger(name)
        logger.setLevel(logging.DEBUG)
        logger.propagate = False

        # Clear existing handlers
        logger.handlers.clear()

        # Console handler with colors
        console_handler = colorlog.StreamHandler(sys.stderr)
        console_handler.setLevel(getattr(logging, settings.log_level))

        console_formatter = colorlog.ColoredFormatter(
            "%(log_color)s%(asctime)s [%(levelname)-8s]%(reset)s %(blue)s%(name)s%(reset)s - %(message)s",
            datefmt=DATE_FORMAT,
            log_colors={
                'DEBUG': 'cyan',
                'INFO': 'green',
                'WARNING': 'yellow',
                'ERROR': 'red',
                'CRITICAL': 'red,bg_white',
            }
        )
        console_handler.setFormatter(console_formatter)
        logger.addHandler(console_handler)

        if settings.log_to_file:
            logger.addHandler(cls._process_file_handler())

        for handler in cls._shared_handlers:
            logger.addHandler(handler)

        cls._loggers[name] = logger
        return logger

    @classmethod
    def _process_file_handler(cls) -> logging.Handler:
        """Return the single file handler shared by all loggers of this process."""
        if cls._file_handler is None:
            log_dir = settings.logs_path
            log_dir.mkdir(parents=True, exist_ok=True)

            file_handler = logging.FileHandler(log_dir / "fednia.log", mode='a')
            file_handler.setLevel(logging.DEBUG)  # Log everything to file
            file_handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt=DATE_FORMAT))
            cls._file_handler = file_handler
        return cls._file_handler

    @classmethod
    def known_loggers(cls) -> list[logging.Logger]:
        """Return every logger created through the factory so far."""
        return list(cls._loggers.values())

    @classmethod
    def set_console_level(cls, level: str) -> None:
        """
        Change the console level of every known logger.

        Args:
            level: Level name such as INFO or DEBUG
        """
        numeric = getattr(logging, level.upper())
        for logger in cls._loggers.values():
            for handler in logger.handlers:
                if isinstance(handler, colorlog.StreamHandler) and not isinstance(handler, logging.FileHandler):
                    handler.setLevel(numeric)


class RunLogCapture:
    """Context manager mirroring all project loggers into a run directory log file."""

    def __init__(self, path: Path, loggers: Optional[Iterable[logging.Logger]] = None):
        """
        Args:
            path: Target log file
            loggers: Loggers to attach to (defaults to every known logger)
        """
        self.path = path
        self._loggers = list(loggers) if loggers is not None else None
        self._handler: Optional[logging.FileHandler] = None
        self._attached: list[logging.Logger] = []

    def __enter__(self) -> "RunLogCapture":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handler = logging.FileHandler(self.path, mode="a")
        self._handler.setLevel(logging.DEBUG)
        self._handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt=DATE_FORMAT))
        targets = self._loggers if self._loggers is not None else SimulationLogger.known_loggers()
        for logger in targets:
            logger.addHandler(self._handler)
            self._attached.append(logger)
        if self._loggers is None:
            SimulationLogger._shared_handlers.append(self._handler)
        return self

    def __exit__(self, *exc_info) -> None:
        if self._handler is None:
            return
        if self._handler in SimulationLogger._shared_handlers:
            SimulationLogger._shared_handlers.remove(self._handler)
        for logger in SimulationLogger.known_loggers():
            logger.removeHandler(self._handler)
        self._handler.close()
        self._attached.clear()


# Convenience function
def get_logger(name: Optional[str] = None) -> logging.Logger:
    """
    Get a logger instance.

    Args:
        name: Logger name (defaults to caller's module name)

    Returns:
        Configured logger instance
    """
    if name is None:
        import inspect
        frame = inspect.currentframe()
        if frame and frame.f_back:
            name = frame.f_back.f_globals.get('__name__', 'fednia')

    return SimulationLogger.get_logger(name or 'fednia')
