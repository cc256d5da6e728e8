"""Data utility functions"""

from .data_utils import (
    run_header, format_value, read_csv, write_csv, read_landmarks, write_landmarks, write_field, read_field,
    write_diffeomorphism, read_diffeomorphism, write_flowpath, write_control, read_control
)

__all__ = [
    'run_header', 'format_value', 'read_csv', 'write_csv', 'read_landmarks', 'write_landmarks', 'write_field',
    'read_field', 'write_diffeomorphism', 'read_diffeomorphism', 'write_flowpath', 'write_control', 'read_control'
]
