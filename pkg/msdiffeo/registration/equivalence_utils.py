"""
Cross-formulation equivalence checks for an optimized control
"""

import dataclasses
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..fields import Grid2
from ..flows import FlowPath, integrate_flow
from ..kernels import ContinuumKernelSpec, bin_continuum, uniform_partition
from ..semidirect import (
    COARSE_LAST, ScaleTuple, diagram_residual, reconstruct_coarse_first, reconstruct_coarse_last, reconstructed_total
)
from .registration_utils import (
    KERNEL_BUNDLE, SDP_COARSE_FIRST, SDP_COARSE_LAST, SIMULTANEOUS, SINGLE_SCALE, SUM_OF_KERNELS,
    Control, MatchingProblem, control_shape, energy, landmark_velocity_paths, sdp_ordering
)

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["formulation", "total", "reg", "data", "rel_delta", "phi_sup_distance", "decay_ratio"]


def project_control(control: Control, problem: MatchingProblem) -> Control:
    """
    Minimal-norm split of a single-scale control: every scale carries the same momentum

    With v = K p, choosing p_i = p gives v_i = K_i p, the projection pi(v).
    """
    if control.n_scales != 1:
        raise ValueError("projection starts from a single-scale control")
    k = control_shape(problem)[0]
    return Control(np.repeat(control.momenta, k, axis=0))


def refine_path(path: FlowPath, factor: int = 2) -> FlowPath:
    """Same velocity (linear in time between nodes) sampled on a finer time grid"""
    n = path.n_steps * factor
    return FlowPath(tuple(path.field_at(m / n) for m in range(n + 1)))


def _reconstruct(st: ScaleTuple, problem: MatchingProblem, scheme: str):
    if st.ordering == COARSE_LAST:
        return reconstruct_coarse_last(st, problem.integrator, scheme)
    return reconstruct_coarse_first(st, problem.integrator, scheme)


def sdp_decay(problem: MatchingProblem, control: Control, grid: Optional[Grid2] = None,
              scheme: str = "product") -> Dict[str, float]:
    """
    Diagram residual of a semidirect formulation at M and 2M time steps

    Returns:
        dict: residual, refined_residual, decay_ratio
    """
    paths = landmark_velocity_paths(problem, control, grid)
    st = ScaleTuple(tuple(paths), sdp_ordering(problem))
    fine = ScaleTuple(tuple(refine_path(p) for p in paths), st.ordering)
    coarse_res = diagram_residual(st, _reconstruct(st, problem, scheme), problem.integrator)
    fine_res = diagram_residual(fine, _reconstruct(fine, problem, scheme), problem.integrator)
    ratio = coarse_res / fine_res if fine_res > 0 else float("nan")
    return {"residual": coarse_res, "refined_residual": fine_res, "decay_ratio": ratio}


def _total_flow(problem: MatchingProblem, control: Control, grid: Grid2):
    paths = landmark_velocity_paths(problem, control, grid)
    total = paths[0]
    for p in paths[1:]:
        total = total + p
    return integrate_flow(total, problem.integrator)[-1]


def _row(name: str, e, ref_total: float, distance: float, ratio: float) -> Dict[str, object]:
    rel = abs(e.total - ref_total) / max(abs(ref_total), 1e-300)
    return {"formulation": name, "total": e.total, "reg": e.regularization_total, "data": e.data,
            "rel_delta": rel, "phi_sup_distance": distance, "decay_ratio": ratio}


def equivalence_report(problem: MatchingProblem, control: Control, grid: Optional[Grid2] = None,
                       partition: Optional[Sequence[float]] = None, n_bins: int = 2,
                       scheme: str = "product") -> List[Dict[str, object]]:
    """
    Evaluate every applicable formulation at the control matching an optimized one

    The reference is a sum-of-kernels or integral-kernel problem and its optimized control.
    Simultaneous and kernel-bundle rows use the projected control; semidirect rows add the
    reconstruction of the per-scale maps; a continuum is also binned into a finite mixture
    (by `partition`, or `n_bins` uniform bins) and evaluated with the unchanged control.

    Returns:
        list: one row per formulation with the columns of REPORT_COLUMNS
    """
    if problem.formulation not in SINGLE_SCALE or problem.is_image:
        raise ValueError("the equivalence report starts from a landmark sum_of_kernels or integral_kernel run")
    grid = grid or problem.velocity_grid
    problem = dataclasses.replace(problem, grid=grid)
    ref = energy(problem, control)
    phi_ref = _total_flow(problem, control, grid)
    nan = float("nan")
    rows = [_row(problem.formulation, ref, ref.total, 0.0, nan)]

    finite = problem
    if isinstance(problem.kernel, ContinuumKernelSpec):
        bundle = problem.with_formulation(KERNEL_BUNDLE)
        c = project_control(control, bundle)
        rows.append(_row(KERNEL_BUNDLE, energy(bundle, c), ref.total,
                         phi_ref.sup_distance(_total_flow(bundle, c, grid)), nan))
        cuts = partition or uniform_partition(problem.kernel.s_min, problem.kernel.s_max, n_bins)
        finite = problem.with_formulation(SUM_OF_KERNELS, bin_continuum(problem.kernel, cuts))
        rows.append(_row(SUM_OF_KERNELS, energy(finite, control), ref.total,
                         phi_ref.sup_distance(_total_flow(finite, control, grid)), nan))

    sim = finite.with_formulation(SIMULTANEOUS)
    c = project_control(control, sim)
    rows.append(_row(SIMULTANEOUS, energy(sim, c), ref.total, phi_ref.sup_distance(_total_flow(sim, c, grid)), nan))

    for name in (SDP_COARSE_LAST, SDP_COARSE_FIRST):
        sdp = finite.with_formulation(name)
        c = project_control(control, sdp)
        paths = landmark_velocity_paths(sdp, c, grid)
        st = ScaleTuple(tuple(paths), sdp_ordering(sdp))
        phi = reconstructed_total(_reconstruct(st, sdp, scheme), st.ordering)
        decay = sdp_decay(sdp, c, grid, scheme)
        rows.append(_row(name, energy(sdp, c), ref.total, phi_ref.sup_distance(phi), decay["decay_ratio"]))

    for r in rows:
        logger.info(f"{r['formulation']}: energy {r['total']:.6e}, rel delta {r['rel_delta']:.2e}, "
                    f"phi distance {r['phi_sup_distance']:.2e}")
    return rows
