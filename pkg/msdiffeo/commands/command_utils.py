"""
Command list and run orchestration for the msdiffeo command line
"""

import argparse
import dataclasses
import logging
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from .. import __version__
from ..data import (
    read_control, read_csv, read_landmarks, run_header, write_control, write_csv, write_diffeomorphism,
    write_flowpath, write_landmarks
)
from ..exceptions import ConfigError
from ..fields import LandmarkSet
from ..file import check_inputs, prepare_output_dir, write_text_atomic
from ..flows import Diffeomorphism, flow_with_inverse, integrate_flow, transport_image
from ..image import load_image, save_pgm
from ..kernels import ContinuumKernelSpec, uniform_partition
from ..registration import (
    KERNEL_BUNDLE, REPORT_COLUMNS, SDP_COARSE_FIRST, SDP_COARSE_LAST, Control, MatchingProblem,
    equivalence_report, image_velocity_path, landmark_velocity_paths, optimize, project_control, sdp_flow,
    shoot_landmarks
)
from ..registration.registration_utils import SINGLE_SCALE
from ..semidirect import (
    COARSE_FIRST, COARSE_LAST, ScaleBundle, ScaleTuple, diagram_residual, reconstruct_coarse_first,
    reconstruct_coarse_last, reconstructed_total, scale_flow, scale_segment
)
from ..verification import run_checks, run_matrix_oracle, write_verify_report
from .config_utils import COMMANDS, RunConfig, dump_config, load_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_FAIL = 3

DECOMPOSITION_COLUMNS = ["factor", "max_displacement", "min_jacobian_det", "max_jacobian_det", "diagram_residual"]


def get_commands() -> Dict[str, str]:
    """
    msdiffeo commands and what they do

    Example:
        >>> sorted(get_commands())
        ['decompose', 'oracle', 'register', 'verify']
    """
    return {
        "register": "Optimize a matching problem; writes energy log, control, final map and equivalence report",
        "decompose": "Split the optimized deformation into per-scale maps and the flow in scale",
        "verify": "Run the numerical equivalence checks on synthetic data from the seed",
        "oracle": "Check the semidirect group laws exactly on random 3x3 matrix tuples",
    }


def is_landmark_file(path: str) -> bool:
    rows = read_csv(path) if path.lower().endswith(".csv") else []
    return bool(rows) and {"id", "x", "y"} <= set(rows[0])


def load_shapes(cfg: RunConfig):
    """Source and target as landmark sets or images"""
    if not cfg.source or not cfg.target:
        raise ConfigError(f"{cfg.command} needs both 'source' and 'target'")
    check_inputs([cfg.source, cfg.target])
    if is_landmark_file(cfg.source):
        return read_landmarks(cfg.source), read_landmarks(cfg.target)
    grid = cfg.velocity_grid()
    return load_image(cfg.source, grid), load_image(cfg.target, grid)


def build_problem(cfg: RunConfig, formulation: Optional[str] = None) -> MatchingProblem:
    source, target = load_shapes(cfg)
    grid = cfg.velocity_grid() if isinstance(source, LandmarkSet) else None
    return MatchingProblem(source, target, cfg.kernel_spec(), formulation or cfg.formulation, cfg.time.steps,
                           cfg.sigma2, cfg.integrator(), grid)


def _partition(cfg: RunConfig, problem: MatchingProblem) -> Optional[List[float]]:
    if isinstance(problem.kernel, ContinuumKernelSpec):
        return uniform_partition(problem.kernel.s_min, problem.kernel.s_max, cfg.time.bins)
    return None


def final_map(problem: MatchingProblem, control: Control) -> Diffeomorphism:
    """phi(1) of a run, carrying its inverse"""
    if problem.is_image:
        return flow_with_inverse(image_velocity_path(problem, control), problem.integrator)
    if problem.formulation in (SDP_COARSE_LAST, SDP_COARSE_FIRST):
        return sdp_flow(problem, control)
    paths = landmark_velocity_paths(problem, control)
    total = paths[0]
    for p in paths[1:]:
        total = total + p
    return flow_with_inverse(total, problem.integrator)


def _jacobian_row(name: str, phi: Diffeomorphism, residual: float) -> Dict[str, object]:
    det = phi.jacobian_determinant().values
    return {"factor": name, "max_displacement": phi.max_displacement(), "min_jacobian_det": float(det.min()),
            "max_jacobian_det": float(det.max()), "diagram_residual": residual}


def _write_image_control(momenta: np.ndarray, file_path: str, header: str) -> bool:
    rows = []
    for k in range(momenta.shape[0]):
        for m in range(momenta.shape[1]):
            for i in range(momenta.shape[2]):
                for j in range(momenta.shape[3]):
                    rows.append({"scale": k, "m": m, "i": i, "j": j,
                                 "px": float(momenta[k, m, i, j, 0]), "py": float(momenta[k, m, i, j, 1])})
    return write_csv(rows, file_path, ["scale", "m", "i", "j", "px", "py"], header)


def _require_written(ok: bool, name: str) -> None:
    if not ok:
        raise OSError(f"could not write {name}")


def run_register(cfg: RunConfig) -> int:
    """
    Optimize the configured problem and write its artifacts

    Outputs: energy_log.csv, control_final.csv, phi_final.csv, landmarks_final.csv or
    deformed.pgm, equivalence_report.csv (landmark sum_of_kernels / integral_kernel runs).
    """
    problem = build_problem(cfg)
    initial = None
    if cfg.control:
        check_inputs([cfg.control])
        if problem.is_image:
            raise ConfigError("initial controls are supported for landmark problems only")
        initial = Control.from_coarse_to_fine(problem, read_control(cfg.control, problem.source.ids))
    result = optimize(problem, cfg.optimizer, initial)
    out = prepare_output_dir(cfg.out)
    header = run_header(cfg.seed, "register")

    log_rows = [{"iter": r.iteration, "total": r.total, "reg": r.regularization, "data": r.data,
                 "step": r.step, "grad_norm": r.grad_norm} for r in result.history]
    _require_written(write_csv(log_rows, os.path.join(out, "energy_log.csv"),
                               ["iter", "total", "reg", "data", "step", "grad_norm"], header), "energy_log.csv")
    control_path = os.path.join(out, "control_final.csv")
    if problem.is_image:
        _require_written(_write_image_control(result.control.momenta, control_path, header), "control_final.csv")
    else:
        _require_written(write_control(result.control.coarse_to_fine(problem), problem.source.ids, control_path,
                                       header), "control_final.csv")

    phi = final_map(problem, result.control)
    _require_written(write_diffeomorphism(phi, os.path.join(out, "phi_final.csv"), header), "phi_final.csv")
    if problem.is_image:
        save_pgm(transport_image(problem.source, phi.inverse()), os.path.join(out, "deformed.pgm"))
    else:
        moved = problem.source.moved_to(shoot_landmarks(problem, result.control)[-1])
        _require_written(write_landmarks(moved, os.path.join(out, "landmarks_final.csv"), header),
                         "landmarks_final.csv")
        if problem.formulation in SINGLE_SCALE:
            rows = equivalence_report(problem, result.control, partition=_partition(cfg, problem), scheme="product")
            _require_written(write_csv(rows, os.path.join(out, "equivalence_report.csv"), REPORT_COLUMNS, header),
                             "equivalence_report.csv")
    write_text_atomic(dump_config(dataclasses.replace(cfg, command="register")), os.path.join(out, "config_used.cfg"))
    if result.warning:
        logger.warning("✗ Optimizer did not converge; artifacts hold the best control found")
    logger.info(f"✓ Register finished: energy {result.breakdown.total:.6e} after {result.iterations} iterations")
    return EXIT_OK


def _decompose_control(cfg: RunConfig, problem: MatchingProblem) -> np.ndarray:
    """Stored momenta, scales coarse to fine"""
    path = cfg.control or os.path.join(cfg.out, "control_final.csv")
    check_inputs([path])
    momenta = read_control(path, problem.source.ids)
    if momenta.shape[1] != problem.time_steps:
        raise ConfigError(f"{path} has {momenta.shape[1]} time intervals, config has time.steps = {problem.time_steps}")
    return momenta


def _decompose_finite(cfg: RunConfig, base: MatchingProblem, momenta: np.ndarray, out: str, header: str) -> None:
    name = SDP_COARSE_LAST if cfg.decompose.ordering == "coarse_last" else SDP_COARSE_FIRST
    sdp = base.with_formulation(name)
    if momenta.shape[0] == 1:
        control = project_control(Control(momenta), sdp)
    else:
        control = Control.from_coarse_to_fine(sdp, momenta)
    paths = landmark_velocity_paths(sdp, control)
    st = ScaleTuple(tuple(paths), COARSE_LAST if name == SDP_COARSE_LAST else COARSE_FIRST)
    convention = cfg.decompose.convention
    if st.ordering == COARSE_LAST:
        psi = reconstruct_coarse_last(st, sdp.integrator, convention=convention)
    else:
        psi = reconstruct_coarse_first(st, sdp.integrator)
    residual = diagram_residual(st, psi, sdp.integrator, convention)
    rows = []
    for k, scale in enumerate(psi, 1):
        for m, psi_km in enumerate(scale):
            fname = f"psi_scale{k}_t{m}.csv"
            _require_written(write_diffeomorphism(psi_km, os.path.join(out, fname), header), fname)
        _require_written(write_flowpath(st.paths[k - 1], out, header, scale=k), f"velocities of scale {k}")
        rows.append(_jacobian_row(f"psi_{k}", scale[-1], residual))
    rows.append(_jacobian_row("phi", reconstructed_total(psi, st.ordering, convention), residual))
    _require_written(write_csv(rows, os.path.join(out, "decomposition_report.csv"), DECOMPOSITION_COLUMNS, header),
                     "decomposition_report.csv")
    logger.info(f"✓ Decomposed into {len(psi)} scales, diagram residual {residual:.3e}")


def _decompose_continuum(cfg: RunConfig, base: MatchingProblem, momenta: np.ndarray, out: str, header: str) -> None:
    bundle_problem = base.with_formulation(KERNEL_BUNDLE)
    control = Control(momenta)
    if control.n_scales == 1:
        control = project_control(control, bundle_problem)
    spec = base.kernel
    # node kernels already carry the quadrature weights, so the bundle density is v_j / lambda_j
    paths = [p * (1.0 / w) for p, w in zip(landmark_velocity_paths(bundle_problem, control), spec.weights)]
    bundle = ScaleBundle.for_kernel(spec, paths)
    cutoffs = uniform_partition(spec.s_min, spec.s_max, cfg.time.scale_nodes)
    flow = scale_flow(bundle, cutoffs, integrator=base.integrator)
    total = integrate_flow(bundle.total(), base.integrator)[-1]
    rows = []
    for j, (s, eta) in enumerate(zip(cutoffs, flow.eta_scale)):
        fname = f"eta_s{j}.csv"
        _require_written(write_diffeomorphism(eta, os.path.join(out, fname), header), fname)
        rows.append(_jacobian_row(f"eta(s={s:.6g})", eta, flow.distances[j]))
    for k in range(1, len(cutoffs)):
        seg = scale_segment(flow.eta_time, cutoffs, cutoffs[k - 1], cutoffs[k], cfg.decompose.segment)
        rows.append(_jacobian_row(f"segment_{k}", seg, float("nan")))
    rows.append(_jacobian_row("phi", total, total.sup_distance(flow.eta_time[-1])))
    _require_written(write_csv(rows, os.path.join(out, "decomposition_report.csv"), DECOMPOSITION_COLUMNS, header),
                     "decomposition_report.csv")
    logger.info(f"✓ Flow in scale at {len(cutoffs)} cutoffs, time/scale distance {flow.max_distance:.3e}")


def run_decompose(cfg: RunConfig) -> int:
    """
    Per-scale factors of a registered deformation

    Finite kernels: psi_scale{k}_t{m}.csv for every scale of the configured semidirect ordering
    and every time node, plus the per-scale velocities. Continuum kernels: eta_s{j}.csv at
    `time.scale_nodes` uniform cutoffs and the scale segments between them. Both write
    decomposition_report.csv.
    """
    base = build_problem(cfg)
    if base.is_image:
        raise ConfigError("decompose supports landmark problems only")
    momenta = _decompose_control(cfg, base)
    out = prepare_output_dir(cfg.out)
    header = run_header(cfg.seed, "decompose")
    if isinstance(base.kernel, ContinuumKernelSpec):
        _decompose_continuum(cfg, base, momenta, out, header)
    else:
        _decompose_finite(cfg, base, momenta, out, header)
    return EXIT_OK


def run_verify(cfg: RunConfig) -> int:
    """Run the verification checks; exit code 3 when any check fails"""
    v = cfg.verify
    report = run_checks(cfg.seed, v.checks, v.threshold_scale, v.oracle_tuples)
    print(report.format_table())
    write_verify_report(report, cfg.out, cfg.seed)
    return EXIT_OK if report.passed else EXIT_FAIL


def run_oracle(cfg: RunConfig) -> int:
    """Exact matrix-group checks; exit code 3 when any law is violated"""
    report = run_matrix_oracle(cfg.seed, cfg.verify.oracle_tuples, threshold_scale=cfg.verify.threshold_scale)
    print(report.format_table())
    out = prepare_output_dir(cfg.out)
    _require_written(write_csv(report.rows(), os.path.join(out, "oracle_report.csv"),
                               ["check", "measured", "bound", "status"], run_header(cfg.seed, "oracle")),
                     "oracle_report.csv")
    return EXIT_OK if report.passed else EXIT_FAIL


HANDLERS = {
    "register": run_register,
    "decompose": run_decompose,
    "verify": run_verify,
    "oracle": run_oracle,
}


def execute_command(cfg: RunConfig) -> int:
    """
    Run one command and translate failures into exit codes

    Returns:
        int: 0 success, 1 invalid configuration or input, 2 numerical failure, 3 failed check
    """
    try:
        return HANDLERS[cfg.command](cfg)
    except ConfigError as e:
        logger.error(f"✗ {e}")
        return EXIT_CONFIG
    except ArithmeticError as e:
        logger.error(f"✗ Numerical failure: {e}")
        return EXIT_NUMERICAL
    except (ValueError, OSError) as e:
        logger.error(f"✗ Error: {e}")
        return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msdiffeo",
                                     description="Multi-scale diffeomorphic registration and its equivalence checks")
    parser.add_argument("--version", action="version", version=f"msdiffeo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, description in get_commands().items():
        p = sub.add_parser(name, help=description, description=description)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", help="Output directory (overrides 'out')")
        p.add_argument("--seed", type=int, help="Seed (overrides 'seed')")
        p.add_argument("--verbose", action="store_true", help="Debug logging")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Command-line entry point

    Example:
        $ msdiffeo verify --seed 7 --out runs/verify
        $ msdiffeo register --config configs/two_scale_demo.cfg
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        if args.config:
            check_inputs([args.config])
            cfg = load_config(args.config)
        elif args.command in ("register", "decompose"):
            raise ConfigError(f"{args.command} needs --config")
        else:
            cfg = RunConfig()
    except ConfigError as e:
        logger.error(f"✗ {e}")
        return EXIT_CONFIG
    overrides = {"command": args.command}
    if args.out is not None:
        overrides["out"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = dataclasses.replace(cfg, **overrides)
    if cfg.command not in COMMANDS:
        logger.error(f"✗ unknown command {cfg.command!r}")
        return EXIT_CONFIG
    return execute_command(cfg)


if __name__ == "__main__":
    sys.exit(main())
