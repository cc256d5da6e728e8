"""
Matching problems, controls and energies for landmark and image registration
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from ..exceptions import ConfigError, FlowBlowUpError
from ..fields import Grid2, LandmarkSet, ScalarField
from ..flows import (
    BLOW_UP_MESSAGE, Diffeomorphism, FlowPath, TimeIntegrator, integrate_points, inverse_flow, transport_image
)
from ..kernels import (
    ContinuumKernelSpec, FiniteKernelSpec, KernelSpec, Momentum, apply_kernel, rkhs_norm, scalar_gram,
    scalar_kernel_slope
)
from ..semidirect import (
    COARSE_FIRST, COARSE_LAST, ScaleTuple, reconstruct_coarse_first, reconstruct_coarse_last, reconstructed_total
)

logger = logging.getLogger(__name__)

SUM_OF_KERNELS = "sum_of_kernels"
SIMULTANEOUS = "simultaneous"
SDP_COARSE_LAST = "sdp_coarse_last"
SDP_COARSE_FIRST = "sdp_coarse_first"
INTEGRAL_KERNEL = "integral_kernel"
KERNEL_BUNDLE = "kernel_bundle"

FINITE_FORMULATIONS = (SUM_OF_KERNELS, SIMULTANEOUS, SDP_COARSE_LAST, SDP_COARSE_FIRST)
CONTINUUM_FORMULATIONS = (INTEGRAL_KERNEL, KERNEL_BUNDLE)
FORMULATIONS = FINITE_FORMULATIONS + CONTINUUM_FORMULATIONS
SINGLE_SCALE = (SUM_OF_KERNELS, INTEGRAL_KERNEL)

Shape = Union[LandmarkSet, ScalarField]


def default_sigma2(source: Shape, target: Shape) -> float:
    """1e-2 * diameter^2 / number of points (pixels for images)"""
    if isinstance(source, ScalarField):
        return 1e-2 * source.grid.diameter ** 2 / source.values.size
    pts = np.vstack([source.points, target.points])
    diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0))) or 1.0
    return 1e-2 * diam ** 2 / len(source)


@dataclass(frozen=True, eq=False)
class MatchingProblem:
    """
    One registration instance

    Args:
        source, target: Landmark sets of equal size, or images on one grid
        kernel: Finite mixture or scale continuum
        formulation: One of FORMULATIONS
        time_steps: Number of piecewise-constant control intervals M
        sigma2: Data noise variance; data weight is 1 / (2 sigma2)
        integrator: Time scheme for the landmark and grid flows
        grid: Grid for velocity fields of landmark problems (covering grid by default)
    """
    source: Shape
    target: Shape
    kernel: KernelSpec
    formulation: str = SUM_OF_KERNELS
    time_steps: int = 10
    sigma2: Optional[float] = None
    integrator: TimeIntegrator = field(default_factory=TimeIntegrator)
    grid: Optional[Grid2] = None

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"unknown formulation {self.formulation!r}")
        if type(self.source) is not type(self.target):
            raise ConfigError("source and target must both be landmarks or both images")
        if isinstance(self.source, LandmarkSet):
            if len(self.source) != len(self.target):
                raise ConfigError(f"{len(self.source)} source landmarks vs {len(self.target)} target landmarks")
        else:
            if self.source.grid != self.target.grid:
                raise ConfigError("source and target images live on different grids")
            if self.formulation not in SINGLE_SCALE:
                raise ConfigError("image matching supports sum_of_kernels and integral_kernel only")
        if self.formulation in FINITE_FORMULATIONS and not isinstance(self.kernel, FiniteKernelSpec):
            raise ConfigError(f"{self.formulation} needs a finite kernel mixture")
        if self.formulation in CONTINUUM_FORMULATIONS and not isinstance(self.kernel, ContinuumKernelSpec):
            raise ConfigError(f"{self.formulation} needs a continuum kernel")
        if int(self.time_steps) < 1:
            raise ConfigError("time_steps must be positive")
        sigma2 = default_sigma2(self.source, self.target) if self.sigma2 is None else float(self.sigma2)
        if not sigma2 > 0:
            raise ConfigError(f"sigma2 must be positive, got {sigma2}")
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "time_steps", int(self.time_steps))

    @property
    def is_image(self) -> bool:
        return isinstance(self.source, ScalarField)

    @property
    def data_weight(self) -> float:
        return 1.0 / (2.0 * self.sigma2)

    @property
    def dt(self) -> float:
        return 1.0 / self.time_steps

    @property
    def velocity_grid(self) -> Grid2:
        if self.is_image:
            return self.source.grid
        if self.grid is not None:
            return self.grid
        return Grid2.covering(np.vstack([self.source.points, self.target.points]))

    def scale_kernels(self) -> List[KernelSpec]:
        """
        Kernel of every control scale

        Single-scale formulations use the whole kernel; simultaneous and coarse-first
        products one component per scale, coarse to fine; the coarse-last product the same
        components finest first; the kernel bundle one weighted kernel per quadrature node.
        """
        if self.formulation in SINGLE_SCALE:
            return [self.kernel]
        if self.formulation == KERNEL_BUNDLE:
            return self.kernel.node_kernels()
        scales = self.kernel.scales()
        return scales[::-1] if self.formulation == SDP_COARSE_LAST else scales

    def with_formulation(self, formulation: str, kernel: Optional[KernelSpec] = None) -> "MatchingProblem":
        return dataclasses.replace(self, formulation=formulation, kernel=kernel or self.kernel)


@dataclass(frozen=True, eq=False)
class Control:
    """
    Piecewise-constant momenta, one block per scale and time interval

    Landmark problems: (scales, M, n, 2) covectors at the moving landmarks.
    Image problems: (1, M, nx, ny, 2) covectors on the image grid.
    """
    momenta: np.ndarray

    def __post_init__(self):
        p = np.array(self.momenta, dtype=float)
        if p.ndim not in (4, 5) or p.shape[-1] != 2:
            raise ValueError(f"unexpected control shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("control contains non-finite values")
        p.setflags(write=False)
        object.__setattr__(self, "momenta", p)

    @classmethod
    def zeros(cls, problem: MatchingProblem) -> "Control":
        return cls(np.zeros(control_shape(problem)))

    @property
    def n_scales(self) -> int:
        return self.momenta.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return self.momenta.ravel()

    @classmethod
    def from_flat(cls, problem: MatchingProblem, x: np.ndarray) -> "Control":
        return cls(np.asarray(x, dtype=float).reshape(control_shape(problem)))

    def coarse_to_fine(self, problem: MatchingProblem) -> np.ndarray:
        """Momenta with the scales coarse to fine, the order control files use"""
        return self.momenta[::-1] if problem.formulation == SDP_COARSE_LAST else self.momenta

    @classmethod
    def from_coarse_to_fine(cls, problem: MatchingProblem, momenta: np.ndarray) -> "Control":
        """Control of the problem from momenta stored coarse to fine"""
        momenta = np.asarray(momenta, dtype=float)
        return cls(momenta[::-1] if problem.formulation == SDP_COARSE_LAST else momenta)


def control_shape(problem: MatchingProblem) -> Tuple[int, ...]:
    if problem.is_image:
        return (1, problem.time_steps) + problem.source.grid.shape + (2,)
    return (len(problem.scale_kernels()), problem.time_steps, len(problem.source), 2)


@dataclass(frozen=True)
class EnergyBreakdown:
    """total = sum(regularization) + data_weight * data"""
    regularization: Tuple[float, ...]
    data: float
    data_weight: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "regularization", tuple(float(r) for r in self.regularization))
        object.__setattr__(self, "total", self.regularization_total + self.data_weight * self.data)

    @property
    def regularization_total(self) -> float:
        acc = 0.0
        for r in self.regularization:
            acc = acc + r
        return acc


def _check_control(problem: MatchingProblem, control: Control) -> None:
    if control.momenta.shape != control_shape(problem):
        raise ValueError(f"control shape {control.momenta.shape} does not fit problem {control_shape(problem)}")


def _landmark_velocity(kernels: List[KernelSpec], q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """sum_i K_i(q, q) p_i at the landmarks"""
    out = np.zeros_like(q)
    for i, spec in enumerate(kernels):
        out = out + scalar_gram(spec, q) @ p[i]
    return out


def _check_finite(x: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise FlowBlowUpError(BLOW_UP_MESSAGE)
    return x


def _step_stages(kernels, q: np.ndarray, p: np.ndarray, h: float, scheme: str):
    """One explicit step; returns the new state and the stage points"""
    if scheme == "euler":
        k1 = _landmark_velocity(kernels, q, p)
        return q + h * k1, (q,)
    k1 = _landmark_velocity(kernels, q, p)
    y2 = q + 0.5 * h * k1
    k2 = _landmark_velocity(kernels, y2, p)
    y3 = q + 0.5 * h * k2
    k3 = _landmark_velocity(kernels, y3, p)
    y4 = q + h * k3
    k4 = _landmark_velocity(kernels, y4, p)
    return q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), (q, y2, y3, y4)


def shoot_landmarks(problem: MatchingProblem, control: Control) -> np.ndarray:
    """
    Landmark trajectory under the control, positions at every time node, (M+1, n, 2)
    """
    _check_control(problem, control)
    kernels = problem.scale_kernels()
    integ = problem.integrator
    h = problem.dt / integ.substeps
    q = np.array(problem.source.points)
    out = [q]
    for m in range(problem.time_steps):
        p = control.momenta[:, m]
        for _ in range(integ.substeps):
            q = _check_finite(_step_stages(kernels, q, p, h, integ.scheme)[0])
        out.append(q)
    return np.stack(out)


def _regularization(problem: MatchingProblem, control: Control, trajectory: np.ndarray) -> Tuple[float, ...]:
    kernels = problem.scale_kernels()
    reg = []
    for i, spec in enumerate(kernels):
        acc = 0.0
        for m in range(problem.time_steps):
            p = control.momenta[i, m]
            acc = acc + float(np.sum(p * (scalar_gram(spec, trajectory[m]) @ p)))
        reg.append(problem.dt * acc)
    return tuple(reg)


def energy(problem: MatchingProblem, control: Control) -> EnergyBreakdown:
    """
    Discretized matching energy

    Regularization: dt * sum over intervals and scales of p^T G_i(q_m) p for landmarks,
    dt * sum of grid RKHS norms for images. Data: squared Euclidean landmark distance, or
    the h^2-weighted L2 image difference.

    Semidirect formulations share the per-scale norms of the simultaneous problem; their
    landmark flow goes through the reconstruction (see sdp_energy).
    """
    if problem.is_image:
        return image_energy(problem, control)
    if problem.formulation in (SDP_COARSE_LAST, SDP_COARSE_FIRST):
        return sdp_energy(problem, control)
    traj = shoot_landmarks(problem, control)
    data = float(np.sum((traj[-1] - problem.target.points) ** 2))
    return EnergyBreakdown(_regularization(problem, control, traj), data, problem.data_weight)


def sdp_ordering(problem: MatchingProblem) -> str:
    return COARSE_LAST if problem.formulation == SDP_COARSE_LAST else COARSE_FIRST


def sdp_flow(problem: MatchingProblem, control: Control, grid: Optional[Grid2] = None,
             scheme: str = "product") -> Diffeomorphism:
    """
    phi(1) of a semidirect formulation: per-scale grid velocities, reconstruction of the
    per-scale maps and their composition
    """
    paths = landmark_velocity_paths(problem, control, grid)
    ordering = sdp_ordering(problem)
    st = ScaleTuple(tuple(paths), ordering)
    if ordering == COARSE_LAST:
        psi = reconstruct_coarse_last(st, problem.integrator, scheme)
    else:
        psi = reconstruct_coarse_first(st, problem.integrator, scheme)
    return reconstructed_total(psi, ordering)


def sdp_energy(problem: MatchingProblem, control: Control, grid: Optional[Grid2] = None) -> EnergyBreakdown:
    """Per-scale norms along the landmark trajectory; data through the reconstructed grid map"""
    traj = shoot_landmarks(problem, control)
    moved = sdp_flow(problem, control, grid)(problem.source.points)
    data = float(np.sum((moved - problem.target.points) ** 2))
    return EnergyBreakdown(_regularization(problem, control, traj), data, problem.data_weight)


def _vjp_positions(spec: KernelSpec, q: np.ndarray, p: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """
    lam . d(G(q) p)/dq, with d/dq_c = sum_b (s_cb + s_bc) slope_cb (q_c - q_b) and s_ab = <lam_a, p_b>
    """
    diff = q[:, None, :] - q[None, :, :]
    slope = scalar_kernel_slope(spec, np.sum(diff * diff, axis=-1))
    s = lam @ p.T
    weight = (s + s.T) * slope
    return np.einsum("cb,cbk->ck", weight, diff)


def _vjp_step(kernels, stages, p: np.ndarray, lam_out: np.ndarray, h: float, scheme: str):
    """Pull a covector on the step output back to the step input and the momenta"""
    n_scales = len(kernels)
    grad_p = np.zeros((n_scales,) + p.shape[1:])

    def vjp(y, lam):
        gq = np.zeros_like(y)
        for i, spec in enumerate(kernels):
            gq = gq + _vjp_positions(spec, y, p[i], lam)
            grad_p[i] = grad_p[i] + scalar_gram(spec, y) @ lam
        return gq

    if scheme == "euler":
        return lam_out + vjp(stages[0], h * lam_out), grad_p
    q, y2, y3, y4 = stages
    lam_q = lam_out.copy()
    k4 = (h / 6.0) * lam_out
    k3 = (h / 3.0) * lam_out
    k2 = (h / 3.0) * lam_out
    k1 = (h / 6.0) * lam_out
    g4 = vjp(y4, k4)
    lam_q = lam_q + g4
    k3 = k3 + h * g4
    g3 = vjp(y3, k3)
    lam_q = lam_q + g3
    k2 = k2 + 0.5 * h * g3
    g2 = vjp(y2, k2)
    lam_q = lam_q + g2
    k1 = k1 + 0.5 * h * g2
    lam_q = lam_q + vjp(q, k1)
    return lam_q, grad_p


def central_difference_gradient(problem: MatchingProblem, control: Control, step: float = 1e-6) -> np.ndarray:
    """Flat gradient of energy() by central differences"""
    _check_control(problem, control)
    x = control.flat
    out = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        plus = energy(problem, Control.from_flat(problem, x + e)).total
        minus = energy(problem, Control.from_flat(problem, x - e)).total
        out[i] = (plus - minus) / (2.0 * step)
    return out


def value_and_gradient(problem: MatchingProblem, control: Control) -> Tuple[EnergyBreakdown, Control]:
    """
    Energy and its exact gradient for landmark problems by reverse accumulation through
    every integrator stage

    Semidirect formulations move the landmarks through the reconstructed grid map, so their
    gradient is the central difference of energy() in every control coordinate.
    """
    if problem.is_image:
        raise ValueError("exact gradients are available for landmark problems only")
    if problem.formulation in (SDP_COARSE_LAST, SDP_COARSE_FIRST):
        grad = central_difference_gradient(problem, control)
        return energy(problem, control), Control.from_flat(problem, grad)
    _check_control(problem, control)
    kernels = problem.scale_kernels()
    integ = problem.integrator
    h = problem.dt / integ.substeps
    q = np.array(problem.source.points)
    starts = [q]
    tape = []
    for m in range(problem.time_steps):
        p = control.momenta[:, m]
        step_tape = []
        for _ in range(integ.substeps):
            q_next, stages = _step_stages(kernels, q, p, h, integ.scheme)
            step_tape.append(stages)
            q = _check_finite(q_next)
        tape.append(step_tape)
        starts.append(q)
    traj = np.stack(starts)
    residual = traj[-1] - problem.target.points
    data = float(np.sum(residual ** 2))
    breakdown = EnergyBreakdown(_regularization(problem, control, traj), data, problem.data_weight)

    grad = np.zeros(control.momenta.shape)
    lam = 2.0 * problem.data_weight * residual
    for m in range(problem.time_steps - 1, -1, -1):
        p = control.momenta[:, m]
        for stages in reversed(tape[m]):
            lam, gp = _vjp_step(kernels, stages, p, lam, h, integ.scheme)
            grad[:, m] += gp
        q_m = traj[m]
        for i, spec in enumerate(kernels):
            grad[i, m] += 2.0 * problem.dt * (scalar_gram(spec, q_m) @ p[i])
            # regularization term p^T G(q_m) p reuses the position VJP with lam = p
            lam = lam + problem.dt * _vjp_positions(spec, q_m, p[i], p[i])
    return breakdown, Control(grad)


def gradient(problem: MatchingProblem, control: Control) -> Control:
    """Gradient of the discretized energy with respect to the control"""
    return value_and_gradient(problem, control)[1]


def landmark_velocity_paths(problem: MatchingProblem, control: Control,
                            grid: Optional[Grid2] = None) -> List[FlowPath]:
    """
    Per-scale grid velocities of a landmark control

    Time node m uses the landmarks at t_m and the momentum of interval m (the last node
    reuses the final interval).
    """
    grid = grid or problem.velocity_grid
    traj = shoot_landmarks(problem, control)
    paths = []
    for i, spec in enumerate(problem.scale_kernels()):
        fields = []
        for m in range(problem.time_steps + 1):
            p = control.momenta[i, min(m, problem.time_steps - 1)]
            fields.append(apply_kernel(spec, Momentum(problem.source.moved_to(traj[m]), p), at=grid))
        paths.append(FlowPath(tuple(fields)))
    return paths


def image_velocity_path(problem: MatchingProblem, control: Control) -> FlowPath:
    grid = problem.source.grid
    fields = [apply_kernel(problem.kernel, Momentum(grid, control.momenta[0, m])) for m in range(problem.time_steps)]
    return FlowPath(tuple(fields) + (fields[-1],))


def image_energy(problem: MatchingProblem, control: Control) -> EnergyBreakdown:
    """Image matching energy (experimental)"""
    _check_control(problem, control)
    grid = problem.source.grid
    reg = 0.0
    for m in range(problem.time_steps):
        reg = reg + rkhs_norm(problem.kernel, Momentum(grid, control.momenta[0, m]))
    path = image_velocity_path(problem, control)
    deformed = transport_image(problem.source, inverse_flow(path, problem.integrator))
    data = float(np.sum((deformed.values - problem.target.values) ** 2)) * grid.h ** 2
    return EnergyBreakdown((problem.dt * reg,), data, problem.data_weight)


def image_direction(problem: MatchingProblem, control: Control) -> Control:
    """
    Kernel-preconditioned descent direction for image matching (experimental)

    d_m = -(2 p_m - 2 w |D phi_{t,1}| (J0_t - J1_t) grad J0_t) with J0_t the source pushed to
    time t, J1_t the target pulled back from time 1 and w the data weight.
    """
    _check_control(problem, control)
    grid = problem.source.grid
    path = image_velocity_path(problem, control)
    times = path.times
    nodes = grid.nodes()
    out = np.zeros(control.momenta.shape)
    for m in range(problem.time_steps):
        phi_t0 = inverse_flow(path, problem.integrator, float(times[m]))
        j0 = transport_image(problem.source, phi_t0)
        to_one = integrate_points(path, nodes, times[m:], problem.integrator)[-1]
        phi_t1 = Diffeomorphism(grid, to_one)
        j1 = transport_image(problem.target, phi_t1)
        det = np.linalg.det(phi_t1.jacobian())
        gx, gy = np.gradient(j0.values, grid.h, grid.h, edge_order=1)
        force = 2.0 * problem.data_weight * det * (j0.values - j1.values)
        out[0, m] = -(2.0 * control.momenta[0, m] - np.stack([force * gx, force * gy], axis=-1))
    return Control(out)
