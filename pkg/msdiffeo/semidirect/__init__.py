"""Semidirect product, scale flow and matrix oracle utility functions"""

from .matrix_utils import (
    COARSE_LAST, COARSE_FIRST, ORDERINGS, MatrixGroupElement, chain_kinds, random_element, random_chain,
    matrix_adjoint, matrix_bracket, ad_rule_residual, max_entry_error
)
from .semidirect_utils import (
    DIRECT, SdpTuple, ScaleTuple, sdp_multiply, sdp_inverse, reorder_hom, reorder_hom_inverse, reorder_tangent,
    trivialize, reconstruct_coarse_last, reconstruct_coarse_first, reconstructed_total, diagram_residual
)
from .scale_utils import (
    ScaleBundle, ScaleFlowResult, scale_velocity, scale_flow, scale_segment, sampling_map, scale_total,
    continuum_bracket, semidirect_bracket, switch_st_residual
)

__all__ = [
    'COARSE_LAST', 'COARSE_FIRST', 'ORDERINGS', 'MatrixGroupElement', 'chain_kinds', 'random_element',
    'random_chain', 'matrix_adjoint', 'matrix_bracket', 'ad_rule_residual', 'max_entry_error',
    'DIRECT', 'SdpTuple', 'ScaleTuple', 'sdp_multiply', 'sdp_inverse', 'reorder_hom', 'reorder_hom_inverse',
    'reorder_tangent', 'trivialize', 'reconstruct_coarse_last', 'reconstruct_coarse_first', 'reconstructed_total',
    'diagram_residual', 'ScaleBundle', 'ScaleFlowResult', 'scale_velocity', 'scale_flow', 'scale_segment',
    'sampling_map', 'scale_total', 'continuum_bracket', 'semidirect_bracket', 'switch_st_residual'
]
