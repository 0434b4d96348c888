"""Common utilities for twinbeam."""
import csv
import io
import logging
import math
import os
from typing import Iterable, Optional, Sequence, Union


LevelLike = Union[int, str]


def setup_logging(name: str, level: LevelLike = logging.INFO) -> logging.Logger:
    """Set up structured logging for a module.

    Args:
        name: Logger name (typically __name__)
        level: Logging level as an int or a name such as "DEBUG" (default: INFO)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    logger.setLevel(_coerce_level(level))

    # Only add handler if none exists
    if not logger.handlers:
        handler = logging.StreamHandler()
        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    return logger


def set_package_level(level: LevelLike) -> None:
    """Apply one level to every twinbeam logger created so far."""
    resolved = _coerce_level(level)
    for name, logger in logging.Logger.manager.loggerDict.items():
        if name.startswith("twinbeam") and isinstance(logger, logging.Logger):
            logger.setLevel(resolved)


def _coerce_level(level: LevelLike) -> int:
    if isinstance(level, int):
        return level
    resolved = logging.getLevelName(str(level).upper())
    return resolved if isinstance(resolved, int) else logging.INFO


def to_db(linear: float) -> float:
    """Convert a linear power ratio to decibels."""
    return 10.0 * math.log10(linear)


def from_db(db: float) -> float:
    """Convert decibels to a linear power ratio."""
    return 10.0 ** (db / 10.0)


def format_float(value: float, digits: int = 9) -> str:
    """Locale-independent float text with `digits` significant digits."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NaN"
    return f"{value:.{digits}g}"


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence], digits: int = 9) -> str:
    """Render a table as LF-terminated CSV text; floats get `digits` significant digits."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v, digits) if isinstance(v, float) or v is None else v for v in row])
    return buffer.getvalue()


def safe_write_file(
    filepath: str,
    content: str,
    logger: Optional[logging.Logger] = None
) -> bool:
    """Safely write content to a file with error handling.

    Args:
        filepath: Path to output file
        content: Content to write
        logger: Logger instance for error reporting

    Returns:
        True on success, False on failure
    """
    if logger is None:
        logger = logging.getLogger(__name__)

    try:
        directory = os.path.dirname(filepath)
        if directory:
            os.makedirs(directory, exist_ok=True)

        # Write to temporary file first
        temp_filepath = f"{filepath}.tmp"
        with open(temp_filepath, 'w', encoding='utf-8', newline='\n') as f:
            f.write(content)

        # Atomic rename
        os.replace(temp_filepath, filepath)
        logger.info(f"Successfully wrote file: {filepath}")
        return True
    except OSError as e:
        logger.error(f"Failed to write file {filepath}: {str(e)}")
        return False
