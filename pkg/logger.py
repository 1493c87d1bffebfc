"""
Structured Logging with Run Context and Hourly File Rotation

Every CLI invocation gets a short run id that prefixes its log lines, so
the output of concurrent or repeated runs can be told apart in one log
directory.

Logs go to a stream (stderr by default, never stdout, which carries the
report) and, when a log directory is given, to hourly rotating files:
heights_2026-10-19_14.log. The CLI passes a stream only with -v, so
without it stderr carries only the error envelope.

Usage:
    from logger import get_run_logger, setup_logging

    setup_logging(log_dir='logs', level='DEBUG')
    log = get_run_logger(run_id)
    log.info("Computing densities at p=%d", p)

Output format:
    [2026-10-19 10:30:45] [INFO] [run=1a2b3c4d] Computing densities at p=2
"""

import logging
import os
import sys
import tempfile
from datetime import datetime
from logging.handlers import TimedRotatingFileHandler
from typing import Optional, TextIO

from config import LOG_BACKUP_HOURS, LOG_LEVEL, LOG_PREFIX

FORMAT = '[%(asctime)s] [%(levelname)s] %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

_log_dir: Optional[str] = None


def resolve_log_dir(requested: str) -> str:
    """Create the requested directory, falling back to ./logs, then the temp directory."""
    candidates = [
        requested,
        os.path.join(os.path.dirname(os.path.abspath(__file__)), 'logs'),
        os.path.join(tempfile.gettempdir(), f'{LOG_PREFIX}-logs'),
    ]
    for path in candidates:
        try:
            os.makedirs(path, exist_ok=True)
            return path
        except (PermissionError, OSError):
            continue
    raise OSError(f"No writable log directory (tried {candidates})")


class HourlyRotatingFileHandler(TimedRotatingFileHandler):
    """
    Hourly log files with readable names.

    File format: heights_YYYY-MM-DD_HH.log
    """

    def __init__(self, log_dir: str, prefix: str = LOG_PREFIX, backup_hours: int = LOG_BACKUP_HOURS):
        self.log_dir = log_dir
        self.prefix = prefix
        super().__init__(
            self._get_log_filename(),
            when='H',
            interval=1,
            backupCount=backup_hours,
            encoding='utf-8',
        )
        self.suffix = ""
        self.namer = self._namer

    def _get_log_filename(self) -> str:
        now = datetime.now()
        return os.path.join(self.log_dir, f"{self.prefix}_{now.strftime('%Y-%m-%d_%H')}.log")

    def _namer(self, default_name: str) -> str:
        return self._get_log_filename()

    def doRollover(self):
        if self.stream:
            self.stream.close()
            self.stream = None
        self.baseFilename = self._get_log_filename()
        self.mode = 'a'
        self.stream = self._open()
        self._cleanup_old_files()

    def _cleanup_old_files(self):
        """Keep at most backupCount hourly files."""
        try:
            log_files = sorted(
                f for f in os.listdir(self.log_dir)
                if f.startswith(self.prefix) and f.endswith('.log')
            )
            for old_file in log_files[:-self.backupCount] if len(log_files) > self.backupCount else []:
                try:
                    os.remove(os.path.join(self.log_dir, old_file))
                except OSError:
                    pass
        except OSError:
            pass


class RunLoggerAdapter(logging.LoggerAdapter):
    """Prepends [run=<id>] to every message."""

    def process(self, msg, kwargs):
        return f"[run={self.extra.get('run_id', 'unknown')}] {msg}", kwargs


def setup_logging(
    log_dir: Optional[str] = None,
    level: str = LOG_LEVEL,
    stream: Optional[TextIO] = sys.stderr,
) -> logging.Logger:
    """
    Configure the root logger: one stream handler (none when stream is None),
    plus hourly files in log_dir when given. Safe to call repeatedly; earlier
    handlers are removed.
    """
    global _log_dir

    formatter = logging.Formatter(fmt=FORMAT, datefmt=DATE_FORMAT)
    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        handler.close()

    if stream is not None:
        stream_handler = logging.StreamHandler(stream)
        stream_handler.setFormatter(formatter)
        root_logger.addHandler(stream_handler)
    else:
        root_logger.addHandler(logging.NullHandler())

    _log_dir = None
    if log_dir:
        try:
            _log_dir = resolve_log_dir(log_dir)
            file_handler = HourlyRotatingFileHandler(_log_dir)
            file_handler.setFormatter(formatter)
            root_logger.addHandler(file_handler)
            root_logger.debug("Logging to directory: %s", _log_dir)
        except OSError as e:
            root_logger.warning("Could not set up file logging: %s", e)

    return root_logger


def get_run_logger(run_id: str, name: str = 'heights.run') -> RunLoggerAdapter:
    return RunLoggerAdapter(logging.getLogger(name), {'run_id': run_id})


def get_log_directory() -> Optional[str]:
    """The active file-log directory, or None when logging to the stream only."""
    return _log_dir
