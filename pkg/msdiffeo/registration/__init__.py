"""Registration utility functions"""

from .registration_utils import (
    SUM_OF_KERNELS, SIMULTANEOUS, SDP_COARSE_LAST, SDP_COARSE_FIRST, INTEGRAL_KERNEL, KERNEL_BUNDLE, FORMULATIONS,
    MatchingProblem, Control, EnergyBreakdown, default_sigma2, control_shape, shoot_landmarks, energy, gradient,
    value_and_gradient, central_difference_gradient, sdp_flow, sdp_energy, landmark_velocity_paths, image_velocity_path, image_energy,
    image_direction
)
from .optimizer_utils import OptimizerConfig, EnergyRecord, OptimizeResult, optimize
from .equivalence_utils import REPORT_COLUMNS, project_control, refine_path, sdp_decay, equivalence_report

__all__ = [
    'SUM_OF_KERNELS', 'SIMULTANEOUS', 'SDP_COARSE_LAST', 'SDP_COARSE_FIRST', 'INTEGRAL_KERNEL', 'KERNEL_BUNDLE',
    'FORMULATIONS', 'MatchingProblem', 'Control', 'EnergyBreakdown', 'default_sigma2', 'control_shape',
    'shoot_landmarks', 'energy', 'gradient', 'value_and_gradient', 'central_difference_gradient',
    'sdp_flow', 'sdp_energy',
    'landmark_velocity_paths', 'image_velocity_path', 'image_energy', 'image_direction',
    'OptimizerConfig', 'EnergyRecord', 'OptimizeResult', 'optimize',
    'REPORT_COLUMNS', 'project_control', 'refine_path', 'sdp_decay', 'equivalence_report'
]
