"""Kernel utility functions"""

from .kernel_utils import (
    GaussianKernel, BinnedKernel, FiniteKernelSpec, ContinuumKernelSpec, KernelSpec, GramSystem, Momentum,
    geometric_sigma, uniform_partition, bin_indices, bin_continuum, scalar_kernel, scalar_kernel_slope,
    scalar_gram, kernel_eval, build_gram, apply_kernel, solve_momentum, project_scales, rkhs_norm
)

__all__ = [
    'GaussianKernel', 'BinnedKernel', 'FiniteKernelSpec', 'ContinuumKernelSpec', 'KernelSpec', 'GramSystem',
    'Momentum', 'geometric_sigma', 'uniform_partition', 'bin_indices', 'bin_continuum', 'scalar_kernel',
    'scalar_kernel_slope', 'scalar_gram', 'kernel_eval', 'build_gram', 'apply_kernel', 'solve_momentum',
    'project_scales', 'rkhs_norm'
]
