"""Image utility functions"""

from .image_utils import image_grid, load_pgm, save_pgm, load_value_csv, load_image

__all__ = ['image_grid', 'load_pgm', 'save_pgm', 'load_value_csv', 'load_image']
