"""
Continuous scale families: the flow in scale, the sampling map into finitely many scales
and the scale brackets
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import GridMismatchError
from ..fields import Grid2, VectorField, integrate_scale, interpolate_values, jacobian_of_values, lie_bracket
from ..flows import (
    Diffeomorphism, FlowPath, TimeIntegrator, adjoint_action, adjoint_inverse_action, compose, integrate_flow,
    inverse_flow
)
from ..kernels import ContinuumKernelSpec, bin_indices
from .matrix_utils import COARSE_FIRST
from .semidirect_utils import ScaleTuple

logger = logging.getLogger(__name__)

CUTOFF_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ScaleBundle:
    """
    Velocity density v_s(t) sampled at quadrature nodes s_j with weights lambda_j

    Integrals over scale are sum_j lambda_j v_{s_j}; scale cells run between the
    midpoints of neighbouring nodes and end at s_min, s_max.
    """
    scales: Tuple[float, ...]
    weights: Tuple[float, ...]
    paths: Tuple[FlowPath, ...]
    s_min: float = 0.0
    s_max: float = 1.0

    def __post_init__(self):
        scales = tuple(float(s) for s in self.scales)
        weights = tuple(float(w) for w in self.weights)
        paths = tuple(self.paths)
        if not (len(scales) == len(weights) == len(paths)) or not scales:
            raise ValueError("a scale bundle needs matching, non-empty scales, weights and paths")
        if any(b <= a for a, b in zip(scales, scales[1:])):
            raise ValueError("bundle scales must be strictly increasing")
        if scales[0] < self.s_min or scales[-1] > self.s_max:
            raise ValueError("bundle scales must lie inside [s_min, s_max]")
        if any(w <= 0 for w in weights):
            raise ValueError("bundle weights must be positive")
        for p in paths[1:]:
            if p.grid != paths[0].grid:
                raise GridMismatchError(f"grid mismatch: {paths[0].grid} vs {p.grid}")
            if p.n_steps != paths[0].n_steps:
                raise ValueError("bundle paths have different time grids")
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "paths", paths)

    @classmethod
    def from_function(cls, grid: Grid2, n_steps: int, n_nodes: int, fn, s_min: float = 0.0,
                      s_max: float = 1.0) -> "ScaleBundle":
        """Midpoint quadrature of fn(X, Y, t, s) -> (vx, vy)"""
        ds = (s_max - s_min) / n_nodes
        scales = [s_min + (j + 0.5) * ds for j in range(n_nodes)]
        paths = [FlowPath.from_function(grid, n_steps, lambda X, Y, t, s=s: fn(X, Y, t, s)) for s in scales]
        return cls(tuple(scales), tuple([ds] * n_nodes), tuple(paths), s_min, s_max)

    @classmethod
    def for_kernel(cls, spec: ContinuumKernelSpec, paths: Sequence[FlowPath]) -> "ScaleBundle":
        """Bundle sharing the quadrature of a continuum kernel"""
        return cls(tuple(spec.scale_values), tuple(spec.weights), tuple(paths), spec.s_min, spec.s_max)

    def __len__(self) -> int:
        return len(self.scales)

    @property
    def grid(self) -> Grid2:
        return self.paths[0].grid

    @property
    def n_steps(self) -> int:
        return self.paths[0].n_steps

    @property
    def boundaries(self) -> List[float]:
        """Cell edges s_min = b_0 < ... < b_J = s_max"""
        mids = [0.5 * (a + b) for a, b in zip(self.scales, self.scales[1:])]
        return [self.s_min] + mids + [self.s_max]

    def cutoff_index(self, s: float) -> int:
        """Index of the cell edge equal to s"""
        if s < self.s_min - CUTOFF_TOL or s > self.s_max + CUTOFF_TOL:
            raise ValueError(f"cutoff {s} outside [{self.s_min}, {self.s_max}]")
        for k, b in enumerate(self.boundaries):
            if abs(b - s) <= CUTOFF_TOL * max(1.0, abs(b)):
                return k
        raise ValueError(f"unsampled cutoff {s}; choose cutoffs on quadrature cell edges")

    def weighted(self, j: int) -> FlowPath:
        return self.weights[j] * self.paths[j]

    def prefix(self, k: int, half_last: bool = False) -> FlowPath:
        """
        sum_{j<k} lambda_j v_j, plus half of the k-th term when half_last is set

        Accumulated node by node in scale order with integrate_scale.
        """
        samples_per_time = []
        for m in range(self.n_steps + 1):
            samples = [(self.weights[j], self.paths[j].velocities[m]) for j in range(k)]
            if half_last:
                samples.append((0.5 * self.weights[k], self.paths[k].velocities[m]))
            if not samples:
                samples_per_time.append(VectorField.zeros(self.grid))
            else:
                samples_per_time.append(integrate_scale(samples))
        return FlowPath(tuple(samples_per_time))

    def total(self) -> FlowPath:
        return self.prefix(len(self))


@dataclass
class ScaleFlowResult:
    """eta at every cutoff, computed through time (way A) and through scale (way B)"""
    cutoffs: List[float]
    eta_time: List[Diffeomorphism]
    eta_scale: List[Diffeomorphism]
    distances: List[float] = field(default_factory=list)

    @property
    def max_distance(self) -> float:
        return max(self.distances) if self.distances else 0.0


def _time_index(bundle: ScaleBundle, t: float) -> int:
    m = int(round(t * bundle.n_steps))
    if abs(m / bundle.n_steps - t) > CUTOFF_TOL or not 0 <= m <= bundle.n_steps:
        raise ValueError(f"time {t} is not a node of the bundle time grid")
    return m


def _pullback_integral(cumulative: FlowPath, density: FlowPath, m: int,
                       integrator: Optional[TimeIntegrator]) -> VectorField:
    """int_0^{t_m} Ad_{psi(r)^{-1}} density(r) dr by the trapezoid rule on the path nodes"""
    grid = cumulative.grid
    flows = integrate_flow(cumulative, integrator)
    dt = cumulative.dt
    acc = np.zeros(grid.shape + (2,))
    for r in range(m + 1):
        w = 0.5 * dt if r in (0, m) else dt
        acc = acc + w * adjoint_inverse_action(flows[r], density.velocities[r]).values
    return VectorField(grid, acc)


def scale_velocity(cumulative: FlowPath, density: FlowPath, m: int,
                   integrator: Optional[TimeIntegrator] = None) -> VectorField:
    """
    W = Ad_{psi(t_m)} int_0^{t_m} Ad_{psi(r)^{-1}} density(r) dr with psi the time flow of `cumulative`
    """
    grid = cumulative.grid
    if m == 0:
        return VectorField.zeros(grid)
    pulled = _pullback_integral(cumulative, density, m, integrator)
    phi = integrate_flow(cumulative, integrator)[m]
    psi = Diffeomorphism(grid, phi.map_values, inverse_flow(cumulative, integrator, m * cumulative.dt).map_values)
    return adjoint_action(psi, pulled)


def _advance_frozen(field_: VectorField, eta: np.ndarray, integrator: TimeIntegrator) -> np.ndarray:
    def velocity(x, _):
        return interpolate_values(field_.values, field_.grid, x, fade=True)
    return integrator.advance(velocity, eta, 0.0, 1.0)


def _advance_pullback(field_: VectorField, eta: np.ndarray, integrator: TimeIntegrator) -> np.ndarray:
    grid = field_.grid
    nodes = grid.nodes()

    def velocity(x, _):
        jac = np.eye(2) + jacobian_of_values(x - nodes, grid.h)
        return np.einsum("...ab,...b->...a", jac, field_.values)
    return integrator.advance(velocity, eta, 0.0, 1.0)


def scale_flow(bundle: ScaleBundle, cutoffs: Sequence[float], t: float = 1.0,
               integrator: Optional[TimeIntegrator] = None, scale_substeps: int = 4,
               variant: str = "adjoint", mask: Optional[np.ndarray] = None) -> ScaleFlowResult:
    """
    Flow in scale eta(s) = psi_s(t), computed two ways

    (A) psi_s(t) is the time flow of int_0^s v_r dr, taken at cell edges.
    (B) d/ds eta = W_s o eta with W_s = Ad_{psi_s(t)} int_0^t Ad_{psi_s(r)^{-1}} v_s(r) dr, frozen
        at the node of every scale cell and integrated with RK4 sub-steps in s.
    variant="pullback" integrates d/ds eta(x) = D eta(x) . w_s(x) with the pulled-back integral w_s
    instead, which needs no inverse of psi_s(t).

    Args:
        bundle: Velocity density at the quadrature nodes
        cutoffs: Cell edges at which eta is reported
        t: Time node (default 1)
        integrator: Time scheme for the flows
        scale_substeps: RK4 sub-steps per scale cell for way B
        variant: "adjoint" or "pullback"
        mask: Nodes over which the two ways are compared

    Raises:
        ValueError: A cutoff lies outside the scale range or between cell edges
    """
    integrator = integrator or TimeIntegrator()
    s_integrator = TimeIntegrator("rk4", scale_substeps)
    if variant not in ("adjoint", "pullback"):
        raise ValueError(f"unknown scale flow variant {variant!r}")
    m = _time_index(bundle, t)
    wanted = [bundle.cutoff_index(s) for s in cutoffs]
    last = max(wanted) if wanted else 0
    grid = bundle.grid

    eta_time = {}
    for k in sorted(set(wanted)):
        if k == 0:
            eta_time[k] = Diffeomorphism.identity(grid)
            continue
        path = bundle.prefix(k)
        eta_time[k] = Diffeomorphism(grid, integrate_flow(path, integrator)[m].map_values,
                                     inverse_flow(path, integrator, t).map_values)

    eta = grid.nodes()
    eta_scale = {0: Diffeomorphism.identity(grid)}
    for j in range(last):
        cumulative = bundle.prefix(j, half_last=True)
        density = bundle.weighted(j)
        if variant == "adjoint":
            eta = _advance_frozen(scale_velocity(cumulative, density, m, integrator), eta, s_integrator)
        else:
            eta = _advance_pullback(_pullback_integral(cumulative, density, m, integrator), eta, s_integrator)
        eta_scale[j + 1] = Diffeomorphism(grid, eta)

    result = ScaleFlowResult(list(cutoffs), [eta_time[k] for k in wanted], [eta_scale[k] for k in wanted])
    result.distances = [a.sup_distance(b, mask) for a, b in zip(result.eta_time, result.eta_scale)]
    logger.info(f"✓ Scale flow over {len(bundle)} nodes, max time/scale distance {result.max_distance:.3e}")
    return result


def scale_segment(eta: Sequence[Diffeomorphism], cutoffs: Sequence[float], s_low: float, s_high: float,
                  side: str = "right") -> Diffeomorphism:
    """
    Scale content of the interval [s_low, s_high]

    side="right": eta(s_low)^{-1} o eta(s_high); side="left": eta(s_high) o eta(s_low)^{-1}

    Raises:
        ValueError: s_low > s_high, or a cutoff that was not sampled
    """
    if s_low > s_high:
        raise ValueError(f"s_low={s_low} exceeds s_high={s_high}")

    def lookup(s):
        for c, e in zip(cutoffs, eta):
            if abs(c - s) <= CUTOFF_TOL * max(1.0, abs(c)):
                return e
        raise ValueError(f"unsampled cutoff {s}")

    low, high = lookup(s_low), lookup(s_high)
    if s_low == s_high:
        return Diffeomorphism.identity(low.grid)
    if side == "right":
        return compose(low.inverse(), high)
    if side == "left":
        return compose(high, low.inverse())
    raise ValueError(f"unknown segment side {side!r}")


def sampling_map(bundle: ScaleBundle, partition: Sequence[float]) -> ScaleTuple:
    """
    Discretize a scale continuum into finitely many scales, v_k = int_{I_k} v_s ds

    Bins are [t_{k-1}, t_k) with the last one closed; bin k = 1 holds the coarsest scales,
    so the result is a coarse-first tuple.

    Raises:
        EmptyBinError: A bin holds no quadrature node
    """
    bins = bin_indices(bundle.scales, partition)
    paths = []
    for idx in bins:
        per_time = [integrate_scale([(bundle.weights[j], bundle.paths[j].velocities[m]) for j in idx])
                    for m in range(bundle.n_steps + 1)]
        paths.append(FlowPath(tuple(per_time)))
    return ScaleTuple(tuple(paths), COARSE_FIRST)


def scale_total(bundle: ScaleBundle, partition: Optional[Sequence[float]] = None) -> FlowPath:
    """
    int v_s ds as one path

    Without a partition the nodes are summed in scale order. With a partition the
    per-bin integrals are summed bin by bin, the order sampling_map uses, so the total
    of a sampled tuple matches it bit for bit.
    """
    if partition is None:
        return bundle.total()
    return sampling_map(bundle, partition).total()


def _cumulative_fields(bundle: ScaleBundle, m: int) -> List[VectorField]:
    """C(s_j) = sum_{i<j} lambda_i v_i + lambda_j v_j / 2 at one time node"""
    out = []
    for j in range(len(bundle)):
        samples = [(bundle.weights[i], bundle.paths[i].velocities[m]) for i in range(j)]
        samples.append((0.5 * bundle.weights[j], bundle.paths[j].velocities[m]))
        out.append(integrate_scale(samples))
    return out


def continuum_bracket(u: ScaleBundle, v: ScaleBundle) -> ScaleBundle:
    """
    [u, v]_s = [u_s, int_0^s v_r dr] + [int_0^s u_r dr, v_s] at every node and time

    The prefix integrals include half of the own cell, so sampling the result reproduces
    the finite semidirect bracket of the sampled tuples.
    """
    if u.scales != v.scales or u.weights != v.weights:
        raise ValueError("bundles use different quadratures")
    if u.grid != v.grid:
        raise GridMismatchError(f"grid mismatch: {u.grid} vs {v.grid}")
    per_node = [[] for _ in range(len(u))]
    for m in range(u.n_steps + 1):
        cu = _cumulative_fields(u, m)
        cv = _cumulative_fields(v, m)
        for j in range(len(u)):
            per_node[j].append(lie_bracket(u.paths[j].velocities[m], cv[j]) + lie_bracket(cu[j], v.paths[j].velocities[m]))
    return ScaleBundle(u.scales, u.weights, tuple(FlowPath(tuple(f)) for f in per_node), u.s_min, u.s_max)


def _bracket_fields(u: List[VectorField], v: List[VectorField], ordering: str) -> List[VectorField]:
    n = len(u)
    out = []
    for k in range(n):
        others = range(k) if ordering == COARSE_FIRST else range(k + 1, n)
        b = lie_bracket(u[k], v[k])
        if others:
            su = integrate_scale([(1.0, u[i]) for i in others])
            sv = integrate_scale([(1.0, v[i]) for i in others])
            b = lie_bracket(u[k], sv) + lie_bracket(su, v[k]) + b
        out.append(b)
    return out


def semidirect_bracket(u: ScaleTuple, v: ScaleTuple) -> ScaleTuple:
    """
    Lie bracket of the semidirect algebra, component-wise
    [u_k, sum v_i] + [sum u_i, v_k] + [u_k, v_k], the sums running over the coarser scales
    """
    if u.ordering != v.ordering or len(u) != len(v):
        raise ValueError("scale tuples differ in ordering or length")
    if u.grid != v.grid:
        raise GridMismatchError(f"grid mismatch: {u.grid} vs {v.grid}")
    per_scale = [[] for _ in range(len(u))]
    for m in range(u.n_steps + 1):
        fields = _bracket_fields([p.velocities[m] for p in u.paths], [p.velocities[m] for p in v.paths], u.ordering)
        for k, f in enumerate(fields):
            per_scale[k].append(f)
    return ScaleTuple(tuple(FlowPath(tuple(f)) for f in per_scale), u.ordering)


def switch_st_residual(bundle: ScaleBundle, j: int, m: int, integrator: Optional[TimeIntegrator] = None,
                       mask: Optional[np.ndarray] = None, bracket=lie_bracket) -> Tuple[float, float]:
    """
    Compatibility of the time and scale velocities, d/ds U - d/dt W = [W, U]

    U_s(t) = int_0^s v_r(t) dr is the time velocity and W_s(t) the scale velocity of psi_s(t);
    d/ds U is the density v_s and d/dt W is a central difference over neighbouring time nodes.

    Returns:
        (sup residual, sup |[W, U]|) over the mask, both at scale node j and time node m
    """
    if not 0 < m < bundle.n_steps:
        raise ValueError("switch_st_residual needs an interior time node")
    cumulative = bundle.prefix(j, half_last=True)
    density = bundle.paths[j]
    w_prev = scale_velocity(cumulative, density, m - 1, integrator)
    w_here = scale_velocity(cumulative, density, m, integrator)
    w_next = scale_velocity(cumulative, density, m + 1, integrator)
    dt = cumulative.dt
    dw = (w_next - w_prev) * (0.5 / dt)
    u_here = cumulative.velocities[m]
    b = bracket(w_here, u_here)
    residual = density.velocities[m] - dw - b
    return residual.sup_norm(mask), b.sup_norm(mask)
