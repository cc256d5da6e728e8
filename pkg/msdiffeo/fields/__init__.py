"""Grid and field utility functions"""

from .field_utils import (
    Grid2, ScalarField, VectorField, LandmarkSet, interpolate, interpolate_values, interpolate_at_offsets,
    jacobian, jacobian_of_values, lie_bracket, integrate_scale
)

__all__ = [
    'Grid2', 'ScalarField', 'VectorField', 'LandmarkSet', 'interpolate', 'interpolate_values', 'interpolate_at_offsets',
    'jacobian', 'jacobian_of_values', 'lie_bracket', 'integrate_scale'
]
