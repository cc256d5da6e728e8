"""File utility functions"""

from .file_utils import prepare_output_dir, write_text_atomic, check_inputs

__all__ = ['prepare_output_dir', 'write_text_atomic', 'check_inputs']
