"""
File utility functions for run directories and atomic writes
"""

import logging
import os
import tempfile
from typing import Iterable, List

from ..exceptions import ConfigError

logger = logging.getLogger(__name__)


def prepare_output_dir(path: str) -> str:
    """
    Create an output directory atomically (an existing directory is reused)

    The directory is built under a temporary name next to the target and renamed
    into place, so a reader never sees a half-created run directory.

    Args:
        path: Directory to create

    Returns:
        str: Absolute path of the directory

    Example:
        >>> prepare_output_dir('runs/demo')  # doctest: +SKIP
        '/abs/runs/demo'
    """
    target = os.path.abspath(path)
    if os.path.isdir(target):
        return target
    if os.path.exists(target):
        raise ConfigError(f"output path {path} exists and is not a directory")
    parent = os.path.dirname(target)
    os.makedirs(parent, exist_ok=True)
    staging = tempfile.mkdtemp(prefix=".msdiffeo-", dir=parent)
    try:
        os.rename(staging, target)
    except OSError:
        os.rmdir(staging)
        if not os.path.isdir(target):
            raise
    logger.info(f"✓ Output directory ready: {target}")
    return target


def write_text_atomic(text: str, file_path: str) -> bool:
    """
    Write a text file through a temporary sibling and an atomic replace

    Returns:
        bool: True if successful, False otherwise
    """
    directory = os.path.dirname(os.path.abspath(file_path))
    try:
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, file_path)
        return True
    except OSError as e:
        logger.error(f"✗ Error writing {file_path}: {e}")
        return False


def check_inputs(paths: Iterable[str]) -> List[str]:
    """
    Make sure every referenced input file exists

    Raises:
        ConfigError: Lists all missing files
    """
    paths = [p for p in paths if p]
    missing = [p for p in paths if not os.path.isfile(p)]
    if missing:
        raise ConfigError(f"missing input file(s): {', '.join(missing)}")
    return paths
