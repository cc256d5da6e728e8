"""Numerical verification suite"""

from .verify_utils import (
    CHECK_ORDER, TOLERANCES, CheckResult, VerifyReport, run_checks, run_matrix_oracle, matrix_oracle,
    brute_force_split, diagram_residuals, sampling_residual, check_switch_st, write_verify_report
)

__all__ = [
    'CHECK_ORDER', 'TOLERANCES', 'CheckResult', 'VerifyReport', 'run_checks', 'run_matrix_oracle', 'matrix_oracle',
    'brute_force_split', 'diagram_residuals', 'sampling_residual', 'check_switch_st', 'write_verify_report'
]
