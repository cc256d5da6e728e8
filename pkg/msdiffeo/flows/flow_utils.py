"""
Flow utilities: time integration, diffeomorphisms, composition, inversion and the adjoint action
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import FlowBlowUpError, GridMismatchError, NotInvertibleError
from ..fields import (
    Grid2, LandmarkSet, ScalarField, VectorField, interpolate_at_offsets, interpolate_values, jacobian_of_values
)

logger = logging.getLogger(__name__)

Velocity = Callable[[np.ndarray, float], np.ndarray]

BLOW_UP_MESSAGE = "flow blow-up; reduce Δt or velocity magnitude"


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FlowPath:
    """
    Time-dependent velocity sampled at uniform nodes 0 = t_0 < ... < t_M = 1

    Between nodes the velocity is interpolated linearly in time; in space it is
    interpolated bilinearly and faded to zero outside the grid.
    """
    velocities: Tuple[VectorField, ...]

    def __post_init__(self):
        vels = tuple(self.velocities)
        if len(vels) < 2:
            raise ValueError("a flow path needs at least two time nodes")
        grid = vels[0].grid
        for v in vels[1:]:
            if v.grid != grid:
                raise GridMismatchError(f"grid mismatch: {grid} vs {v.grid}")
        object.__setattr__(self, "velocities", vels)

    @property
    def grid(self) -> Grid2:
        return self.velocities[0].grid

    @property
    def n_steps(self) -> int:
        return len(self.velocities) - 1

    @property
    def dt(self) -> float:
        return 1.0 / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_steps + 1)

    @classmethod
    def zeros(cls, grid: Grid2, n_steps: int) -> "FlowPath":
        return cls(tuple(VectorField.zeros(grid) for _ in range(n_steps + 1)))

    @classmethod
    def stationary(cls, field: VectorField, n_steps: int) -> "FlowPath":
        return cls(tuple(field for _ in range(n_steps + 1)))

    @classmethod
    def from_function(cls, grid: Grid2, n_steps: int, fn: Callable[[np.ndarray, np.ndarray, float], Tuple]) -> "FlowPath":
        """Sample fn(X, Y, t) -> (vx, vy) at every grid node and time node"""
        times = np.linspace(0.0, 1.0, n_steps + 1)
        return cls(tuple(VectorField.from_function(grid, lambda X, Y, t=t: fn(X, Y, t)) for t in times))

    def values_at(self, t: float) -> np.ndarray:
        m = t * self.n_steps
        m0 = int(min(max(np.floor(m), 0), self.n_steps - 1))
        a = m - m0
        if a == 0.0:
            return self.velocities[m0].values
        if a == 1.0:
            return self.velocities[m0 + 1].values
        return (1.0 - a) * self.velocities[m0].values + a * self.velocities[m0 + 1].values

    def field_at(self, t: float) -> VectorField:
        return VectorField(self.grid, self.values_at(t))

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        return interpolate_values(self.values_at(t), self.grid, x, fade=True)

    def __add__(self, other: "FlowPath") -> "FlowPath":
        if other.n_steps != self.n_steps:
            raise ValueError("flow paths have different time grids")
        return FlowPath(tuple(a + b for a, b in zip(self.velocities, other.velocities)))

    def __mul__(self, scalar: float) -> "FlowPath":
        return FlowPath(tuple(float(scalar) * v for v in self.velocities))

    __rmul__ = __mul__

    def __neg__(self) -> "FlowPath":
        return FlowPath(tuple(-v for v in self.velocities))


@dataclass(frozen=True)
class TimeIntegrator:
    """
    Explicit one-step ODE scheme

    Args:
        scheme: "rk4" (default) or "euler"
        substeps: Sub-steps per path interval
    """
    scheme: str = "rk4"
    substeps: int = 1

    def __post_init__(self):
        if self.scheme not in ("rk4", "euler"):
            raise ValueError(f"unknown integrator scheme {self.scheme!r}")
        if int(self.substeps) < 1:
            raise ValueError("substeps must be a positive integer")

    def step(self, velocity: Velocity, x: np.ndarray, t: float, dt: float) -> np.ndarray:
        if self.scheme == "euler":
            return x + dt * velocity(x, t)
        k1 = velocity(x, t)
        k2 = velocity(x + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = velocity(x + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = velocity(x + dt * k3, t + dt)
        return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def advance(self, velocity: Velocity, x: np.ndarray, t0: float, t1: float) -> np.ndarray:
        """Integrate x' = velocity(x, t) from t0 to t1 (t1 < t0 runs backwards)"""
        h = (t1 - t0) / self.substeps
        for k in range(self.substeps):
            x = self.step(velocity, x, t0 + k * h, h)
            if not np.all(np.isfinite(x)):
                raise FlowBlowUpError(BLOW_UP_MESSAGE)
        return x


def integrate_points(velocity: Velocity, x0: np.ndarray, times: Sequence[float],
                     integrator: Optional[TimeIntegrator] = None) -> List[np.ndarray]:
    """
    Advect points through a velocity given as a callable v(x, t)

    Returns:
        list: Positions at every entry of `times`, the first being x0
    """
    integrator = integrator or TimeIntegrator()
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise FlowBlowUpError(BLOW_UP_MESSAGE)
    out = [x]
    for t0, t1 in zip(times[:-1], times[1:]):
        x = integrator.advance(velocity, x, float(t0), float(t1))
        out.append(x)
    return out


@dataclass(frozen=True, eq=False)
class Diffeomorphism:
    """
    Grid map x -> phi(x) stored by its node images

    Off the nodes phi is evaluated as x + bilinear displacement, the displacement
    fading to zero outside the grid. The inverse is filled on demand.
    """
    grid: Grid2
    map_values: np.ndarray
    inverse_values: Optional[np.ndarray] = None

    def __post_init__(self):
        vals = _readonly(self.map_values)
        if vals.shape != self.grid.shape + (2,):
            raise ValueError(f"map shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise FlowBlowUpError(BLOW_UP_MESSAGE)
        object.__setattr__(self, "map_values", vals)
        if self.inverse_values is not None:
            object.__setattr__(self, "inverse_values", _readonly(self.inverse_values))

    @classmethod
    def identity(cls, grid: Grid2) -> "Diffeomorphism":
        nodes = grid.nodes()
        return cls(grid, nodes, nodes)

    @classmethod
    def translation(cls, grid: Grid2, shift) -> "Diffeomorphism":
        nodes = grid.nodes()
        a = np.asarray(shift, dtype=float)
        return cls(grid, nodes + a, nodes - a)

    @classmethod
    def from_function(cls, grid: Grid2, fn: Callable[[np.ndarray, np.ndarray], Tuple]) -> "Diffeomorphism":
        pos = grid.nodes()
        fx, fy = fn(pos[..., 0], pos[..., 1])
        return cls(grid, np.stack([np.broadcast_to(fx, grid.shape), np.broadcast_to(fy, grid.shape)], axis=-1))

    @property
    def displacement(self) -> np.ndarray:
        return self.map_values - self.grid.nodes()

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x + interpolate_values(self.displacement, self.grid, x, fade=True)

    def at_offsets(self, offsets: np.ndarray) -> np.ndarray:
        """phi evaluated at node + offset for every node"""
        nodes = self.grid.nodes()
        return nodes + offsets + interpolate_at_offsets(self.displacement, self.grid, offsets, fade=True)

    def inverse(self) -> "Diffeomorphism":
        if self.inverse_values is None:
            object.__setattr__(self, "inverse_values", _readonly(_invert_map(self)))
        return Diffeomorphism(self.grid, self.inverse_values, self.map_values)

    def jacobian(self) -> np.ndarray:
        """D phi at the nodes, (nx, ny, 2, 2)"""
        return np.eye(2) + jacobian_of_values(self.displacement, self.grid.h)

    def jacobian_determinant(self) -> ScalarField:
        return ScalarField(self.grid, np.linalg.det(self.jacobian()))

    def sup_distance(self, other: "Diffeomorphism", mask: Optional[np.ndarray] = None) -> float:
        if other.grid != self.grid:
            raise GridMismatchError(f"grid mismatch: {self.grid} vs {other.grid}")
        d = np.linalg.norm(self.map_values - other.map_values, axis=-1)
        if mask is not None:
            d = d[mask]
        return float(d.max()) if d.size else 0.0

    def max_displacement(self, mask: Optional[np.ndarray] = None) -> float:
        d = np.linalg.norm(self.displacement, axis=-1)
        if mask is not None:
            d = d[mask]
        return float(d.max()) if d.size else 0.0


def _invert_map(phi: Diffeomorphism, max_iter: int = 60) -> np.ndarray:
    """Node preimages by Newton iterations on y + d(y) = x with interpolated Jacobians"""
    grid = phi.grid
    target = grid.nodes()
    disp = phi.displacement
    jac_nodes = phi.jacobian()
    tol = 1e-10 * grid.h
    y = target - disp
    residual = np.inf
    for _ in range(max_iter):
        r = y + interpolate_values(disp, grid, y, fade=True) - target
        residual = float(np.max(np.abs(r)))
        if not np.isfinite(residual):
            raise NotInvertibleError("map could not be inverted (non-finite iterate)")
        if residual <= tol:
            break
        jac = interpolate_values(jac_nodes, grid, y, fade=False)
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        bad = np.abs(det) < 1e-12
        jac[bad] = np.eye(2)
        y = y - np.linalg.solve(jac, r[..., None])[..., 0]
    if residual > grid.h:
        raise NotInvertibleError(f"map could not be inverted (residual {residual:.3g})")
    if residual > 1e-6 * grid.h:
        logger.warning(f"✗ Map inversion stopped at residual {residual:.3g}")
    return y


def _check_same_grid(a: Grid2, b: Grid2) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


def _compose_values(phi: Diffeomorphism, psi: Diffeomorphism) -> np.ndarray:
    return psi.map_values + interpolate_at_offsets(phi.displacement, phi.grid, psi.displacement, fade=True)


def compose(phi: Diffeomorphism, psi: Diffeomorphism) -> Diffeomorphism:
    """
    Composition (phi o psi)(x) = phi(psi(x)) at the nodes

    Inverses are composed as well when both factors carry one.

    Example:
        >>> g = Grid2.unit(5)
        >>> compose(Diffeomorphism.identity(g), Diffeomorphism.translation(g, [0.1, 0.0])).map_values[2, 2]
        array([0.6, 0.5])
    """
    _check_same_grid(phi.grid, psi.grid)
    values = _compose_values(phi, psi)
    inverse = None
    if phi.inverse_values is not None and psi.inverse_values is not None:
        inverse = _compose_values(psi.inverse(), phi.inverse())
    return Diffeomorphism(phi.grid, values, inverse)


def compose_all(maps: Sequence[Diffeomorphism]) -> Diffeomorphism:
    """phi_1 o phi_2 o ... o phi_n"""
    maps = list(maps)
    if not maps:
        raise ValueError("compose_all needs at least one map")
    out = maps[-1]
    for phi in reversed(maps[:-1]):
        out = compose(phi, out)
    return out


def integrate_flow(path: FlowPath, integrator: Optional[TimeIntegrator] = None) -> List[Diffeomorphism]:
    """
    Flow d/dt phi_t = v(t) o phi_t with phi_0 = Id

    Returns:
        list: phi at every time node of the path

    Raises:
        FlowBlowUpError: An iterate became non-finite
    """
    grid = path.grid
    positions = integrate_points(path, grid.nodes(), path.times, integrator)
    logger.debug(f"Integrated flow over {path.n_steps} steps on a {grid.nx}x{grid.ny} grid")
    return [Diffeomorphism(grid, x) for x in positions]


def inverse_flow(path: FlowPath, integrator: Optional[TimeIntegrator] = None, t_end: float = 1.0) -> Diffeomorphism:
    """
    Inverse map phi_{t_end}^{-1} by integrating d/dtau xi = -v(t_end - tau) o xi

    Args:
        path: Velocity path
        integrator: Time scheme (RK4 by default)
        t_end: Time node whose flow is inverted
    """
    integrator = integrator or TimeIntegrator()
    m_end = int(round(t_end * path.n_steps))
    times = path.times
    x = path.grid.nodes()
    for m in range(m_end, 0, -1):
        x = integrator.advance(path, x, float(times[m]), float(times[m - 1]))
    return Diffeomorphism(path.grid, x)


def flow_with_inverse(path: FlowPath, integrator: Optional[TimeIntegrator] = None) -> Diffeomorphism:
    """phi_1 carrying its backward-integrated inverse"""
    phi = integrate_flow(path, integrator)[-1]
    return Diffeomorphism(path.grid, phi.map_values, inverse_flow(path, integrator).map_values)


def step_map(velocity: Velocity, grid: Grid2, t0: float, t1: float,
             integrator: Optional[TimeIntegrator] = None) -> Diffeomorphism:
    """Flow of a velocity from t0 to t1 as a grid map, with its inverse (flow from t1 back to t0)"""
    integrator = integrator or TimeIntegrator()
    nodes = grid.nodes()
    forward = integrator.advance(velocity, nodes, t0, t1)
    backward = integrator.advance(velocity, nodes, t1, t0)
    return Diffeomorphism(grid, forward, backward)


def inverse_consistency(phi: Diffeomorphism, phi_inv: Diffeomorphism, mask: Optional[np.ndarray] = None) -> float:
    """sup |phi(phi^{-1}(x)) - x| over the nodes"""
    _check_same_grid(phi.grid, phi_inv.grid)
    return Diffeomorphism(phi.grid, _compose_values(phi, phi_inv)).max_displacement(mask)


def adjoint_action(phi: Diffeomorphism, v: VectorField) -> VectorField:
    """
    Ad_phi v = (D phi . v) o phi^{-1}

    D phi comes from central differences of the node images. The inverse is
    computed on demand when phi does not carry one.
    """
    _check_same_grid(phi.grid, v.grid)
    inv = phi.inverse()
    pushed = np.einsum("...ab,...b->...a", phi.jacobian(), v.values)
    return VectorField(v.grid, interpolate_at_offsets(pushed, v.grid, inv.displacement, fade=True))


def adjoint_inverse_action(phi: Diffeomorphism, v: VectorField) -> VectorField:
    """Ad_{phi^{-1}} v (x) = D phi(x)^{-1} v(phi(x)); needs no inverse map"""
    _check_same_grid(phi.grid, v.grid)
    pulled = interpolate_at_offsets(v.values, v.grid, phi.displacement, fade=True)
    return VectorField(v.grid, np.linalg.solve(phi.jacobian(), pulled[..., None])[..., 0])


def transport_image(image: ScalarField, phi_inv: Diffeomorphism) -> ScalarField:
    """
    Push an image forward: (phi . I)(x) = I(phi^{-1}(x)), queries clamped to the grid
    """
    _check_same_grid(image.grid, phi_inv.grid)
    return ScalarField(image.grid, interpolate_at_offsets(image.values, image.grid, phi_inv.displacement, fade=False))


def transport_landmarks(q: LandmarkSet, velocity: Union[FlowPath, Velocity],
                        integrator: Optional[TimeIntegrator] = None,
                        times: Optional[Sequence[float]] = None) -> LandmarkSet:
    """
    Move landmarks with a velocity, evaluated directly at the moving points

    Args:
        q: Landmarks at t = 0
        velocity: FlowPath (interpolated in space) or analytic callable v(x, t)
        integrator: Time scheme
        times: Time nodes; defaults to the path nodes or 16 uniform steps
    """
    if times is None:
        times = velocity.times if isinstance(velocity, FlowPath) else np.linspace(0.0, 1.0, 17)
    final = integrate_points(velocity, q.points, times, integrator)[-1]
    return q.moved_to(final)
