"""
Logging facilities shared by every probe and driver in maxdual.

The interface follows the usual pattern of the code base: a severity enum, a
global level setter, an optional output file and a single logging function.
Drivers write banner-style progress at :attr:`LogLevel.Info` and silence
sub-solvers by temporarily raising the level to :attr:`LogLevel.Warning`.
"""

import logging
import sys
from enum import Enum
from typing import Optional


class LogLevel(Enum):
    """
    Severity levels understood by :func:`maxdual_log`.
    """

    Debug = logging.DEBUG
    """
    Detailed diagnostics (per-iteration values of solvers).
    """

    Info = logging.INFO
    """
    Progress information for batch experiments.
    """

    Warning = logging.WARNING
    """
    Recoverable problems: skipped candidates, divergent tails, overflow.
    """

    Error = logging.ERROR
    """
    Failed inequalities and aborted runs.
    """


_logger = logging.getLogger("maxdual")
_logger.propagate = False
_logger.setLevel(logging.INFO)

_console = logging.StreamHandler(sys.stdout)
_console.setFormatter(logging.Formatter("[%(levelname)s] %(message)s"))
_logger.addHandler(_console)

_file_handler: Optional[logging.FileHandler] = None


def set_logging_level(level: LogLevel) -> None:
    """
    Sets the minimum severity of messages which will be written.

    Parameters
    ----------
    level : LogLevel
        New minimum severity.
    """
    if not isinstance(level, LogLevel):
        raise TypeError("Logging level must be a LogLevel.")
    _logger.setLevel(level.value)


def logging_level() -> LogLevel:
    """
    Returns the current minimum severity.
    """
    return LogLevel(_logger.level)


def set_output_file(fname: str) -> None:
    """
    Duplicates all log output into a file. Calling this again replaces the
    previous output file.

    Parameters
    ----------
    fname : str
        Path of the log file.
    """
    global _file_handler
    if _file_handler is not None:
        _logger.removeHandler(_file_handler)
        _file_handler.close()
    _file_handler = logging.FileHandler(fname, mode="w")
    _file_handler.setFormatter(logging.Formatter("[%(levelname)s] %(message)s"))
    _logger.addHandler(_file_handler)


def maxdual_log(level: LogLevel, message: str) -> None:
    """
    Writes a message to the log.

    Parameters
    ----------
    level : LogLevel
        Severity of the message.
    message : str
        Text to write.
    """
    _logger.log(level.value, message)
