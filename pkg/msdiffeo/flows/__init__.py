"""Flow and diffeomorphism utility functions"""

from .flow_utils import (
    BLOW_UP_MESSAGE, FlowPath, TimeIntegrator, Diffeomorphism, integrate_points, integrate_flow, inverse_flow,
    flow_with_inverse, step_map, inverse_consistency, compose, compose_all, adjoint_action,
    adjoint_inverse_action, transport_image, transport_landmarks
)

__all__ = [
    'BLOW_UP_MESSAGE', 'FlowPath', 'TimeIntegrator', 'Diffeomorphism', 'integrate_points', 'integrate_flow', 'inverse_flow',
    'flow_with_inverse', 'step_map', 'inverse_consistency', 'compose', 'compose_all', 'adjoint_action',
    'adjoint_inverse_action', 'transport_image', 'transport_landmarks'
]
