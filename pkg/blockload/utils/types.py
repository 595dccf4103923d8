#
# types.py
#
# Copyright 2024 The blockload authors. All rights reserved.
#

"""
Shared error types and the buffered logger used across the application.
"""

from dataclasses import dataclass
from datetime import datetime
import logging
from pathlib import Path
import traceback
from typing import Any, List, Optional, Tuple

import click


class ManifestError(Exception):
    """
    Raised when a manifest cannot be parsed or violates its invariants,
    or when a synthetic manifest spec cannot be satisfied
    """

    line_number: Optional[int]

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class PackingError(Exception):
    """Raised when a packing operation receives invalid parameters or plans"""


class InfeasiblePackingError(PackingError):
    """
    Raised when the input cannot be packed at all: a sequence is longer
    than the block capacity, or no sequence survives chunking
    """

    sequence_id: Optional[str]

    def __init__(self, message: str, sequence_id: Optional[str] = None):
        super().__init__(message)
        self.sequence_id = sequence_id


class PlanFormatError(PackingError):
    """Raised when a plan document cannot be decoded into a valid plan"""


class OracleError(Exception):
    """Raised when an instance is outside what the exhaustive search accepts"""


class SimulationError(Exception):
    """Raised when units cannot be dealt to ranks"""


@dataclass
class RunConfig:
    """The global options shared by every subcommand"""

    output_format: str
    log_level: str
    seed: Optional[int] = None


class DelayedLog:
    """
    Saves a list of logs and dumps them to stderr
    on graceful exit or on manual dump call.
    """

    _logs: List[Tuple[int, str, datetime]]
    log_level: int
    logger: Optional[logging.Logger] = None

    DEVELOPMENT = logging.NOTSET + 1
    TRACEBACK = logging.DEBUG - 1
    DEBUG = logging.DEBUG
    INFO = logging.INFO
    WARN = logging.WARN
    ERR = logging.ERROR
    LOG_COLORS = {
        logging.DEBUG - 1: "black",
        logging.DEBUG: "blue",
        logging.INFO: "cyan",
        logging.WARN: "yellow",
        logging.ERROR: "red",
    }

    def __init__(self):
        self._logs = []
        self.log_level = self.WARN
        logging.addLevelName(self.TRACEBACK, "TRACEBACK")
        logging.addLevelName(self.DEVELOPMENT, "DEVELOPMENT")

    def initialize_development_logging(self, log_dir: Path):
        """Initialize logging for development purposes, saving to a file."""
        log_dir.mkdir(parents=True, exist_ok=True)
        logging.basicConfig(level=self.log_level, filename=log_dir / "blockload.log")
        self.logger = logging.getLogger("blockload")

    def set_level(self, level_name: str) -> bool:
        """Set the level from its name; returns False if the name is unknown"""
        level = logging.getLevelName(level_name.upper())
        if isinstance(level, str):
            self.log_level = self.WARN
            return False
        self.log_level = level
        return True

    def dump(self):
        """Print all logs to stderr."""
        for level, log_lines, time in self._logs:
            if level >= self.log_level:
                for line in log_lines.split("\n"):
                    click.echo(
                        click.style(
                            f"[{logging.getLevelName(level)}]".ljust(9),
                            fg=self.LOG_COLORS.get(level, None),
                        ),
                        nl=False,
                        err=True,
                    )
                    click.echo(time.strftime("%H:%M:%S") + " " + line, err=True)
        self._logs = []

    def log(self, *messages: Any, log_level: int = logging.NOTSET + 1):
        """Log a message, by default at DEVELOPMENT level. Messages below the log level are dropped."""
        if log_level < self.log_level:
            return
        line = " ".join([str(_) for _ in messages])
        time = datetime.now()
        if self.logger is not None:
            self.logger.log(log_level, "%.3f %s", time.timestamp(), line)
        self._logs.append((log_level, line, time))

    def debug(self, *messages: Any):
        """Log a debug message."""
        self.log(*messages, log_level=self.DEBUG)

    def info(self, *messages: Any):
        """Log an info message."""
        self.log(*messages, log_level=self.INFO)

    def warn(self, *messages: Any):
        """Log a warning message."""
        self.log(*messages, log_level=self.WARN)

    def err(self, *messages: Any):
        """Log an error message."""
        self.log(*messages, log_level=self.ERR)

    def traceback(self, exception: BaseException):
        """Log a traceback."""
        self.log(
            "".join(
                traceback.format_exception(
                    type(exception), exception, exception.__traceback__
                )
            ),
            log_level=self.TRACEBACK,
        )
