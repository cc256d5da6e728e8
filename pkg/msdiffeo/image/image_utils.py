"""
Image utility functions for loading and saving grey-level images as grid fields
"""

import logging
import os
from typing import Optional

import numpy as np

from ..exceptions import ConfigError
from ..fields import Grid2, ScalarField

logger = logging.getLogger(__name__)


def image_grid(width: int, height: int) -> Grid2:
    """Pixel grid with the longer side spanning [0, 1]"""
    return Grid2(width, height, 1.0 / (max(width, height) - 1))


def load_pgm(input_path: str) -> ScalarField:
    """
    Load a PGM image (P2 ASCII or P5 binary) as intensities in [0, 1]

    Pixel (row r, column c) becomes node (i, j) = (c, r).

    Raises:
        ConfigError: Pillow is missing or the file cannot be decoded
    """
    try:
        from PIL import Image
    except ImportError as e:
        raise ConfigError("Pillow not installed. Install with: pip install Pillow") from e
    try:
        with Image.open(input_path) as img:
            arr = np.asarray(img, dtype=float)
            scale = 255.0 if img.mode == "L" else max(float(arr.max()), 1.0)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read image {input_path}: {e}") from e
    if arr.ndim != 2:
        raise ConfigError(f"{input_path} is not a grey-level image")
    height, width = arr.shape
    return ScalarField(image_grid(width, height), arr.T / scale)


def save_pgm(image: ScalarField, output_path: str) -> bool:
    """
    Save a field as an 8-bit PGM, intensities clipped to [0, 1]

    Returns:
        bool: True if successful, False otherwise
    """
    try:
        from PIL import Image
    except ImportError:
        logger.error("✗ Pillow not installed. Install with: pip install Pillow")
        return False
    try:
        pixels = np.round(np.clip(image.values.T, 0.0, 1.0) * 255.0).astype(np.uint8)
        Image.fromarray(pixels).save(output_path, format="PPM")
        logger.info(f"✓ Image saved to {output_path}")
        return True
    except (OSError, ValueError) as e:
        logger.error(f"✗ Error saving image: {e}")
        return False


def load_value_csv(input_path: str, grid: Optional[Grid2] = None) -> ScalarField:
    """Image from a CSV with columns i,j,value; the grid defaults to the pixel grid"""
    from ..data import read_csv
    rows = read_csv(input_path)
    if not rows or not {"i", "j", "value"} <= set(rows[0]):
        raise ConfigError(f"{input_path} must have columns i,j,value")
    nx = 1 + max(int(r["i"]) for r in rows)
    ny = 1 + max(int(r["j"]) for r in rows)
    grid = grid or image_grid(nx, ny)
    values = np.zeros(grid.shape)
    for r in rows:
        values[int(r["i"]), int(r["j"])] = float(r["value"])
    return ScalarField(grid, values)


def load_image(input_path: str, grid: Optional[Grid2] = None) -> ScalarField:
    """PGM or value CSV, by extension"""
    ext = os.path.splitext(input_path)[1].lower()
    if ext == ".pgm":
        return load_pgm(input_path)
    if ext == ".csv":
        return load_value_csv(input_path, grid)
    raise ConfigError(f"unsupported image format {ext!r}; use .pgm or .csv")
