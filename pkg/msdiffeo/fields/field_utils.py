"""
Grid, field and differential-operator utilities
"""

import logging
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple, Union

import numpy as np

from ..exceptions import GridMismatchError, InvalidQueryError

logger = logging.getLogger(__name__)


def _frozen(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Grid2:
    """
    Regular isotropic 2-D grid; node (i, j) sits at origin + (i*h, j*h)

    Args:
        nx: Number of nodes along x (>= 2)
        ny: Number of nodes along y (>= 2)
        h: Node spacing (> 0)
        origin: Position of node (0, 0)
    """
    nx: int
    ny: int
    h: float
    origin: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if int(self.nx) < 2 or int(self.ny) < 2:
            raise ValueError(f"grid needs at least 2x2 nodes, got {self.nx}x{self.ny}")
        if not (np.isfinite(self.h) and self.h > 0):
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def extent(self) -> Tuple[float, float]:
        return ((self.nx - 1) * self.h, (self.ny - 1) * self.h)

    @property
    def upper(self) -> Tuple[float, float]:
        return (self.origin[0] + self.extent[0], self.origin[1] + self.extent[1])

    @property
    def diameter(self) -> float:
        return float(np.hypot(*self.extent))

    def nodes(self) -> np.ndarray:
        """Node positions as an (nx, ny, 2) array"""
        xs = self.origin[0] + self.h * np.arange(self.nx)
        ys = self.origin[1] + self.h * np.arange(self.ny)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def interior_mask(self, margin: float) -> np.ndarray:
        """Boolean (nx, ny) mask of nodes at least `margin` away from the boundary"""
        pos = self.nodes()
        lo = np.array(self.origin) + margin
        hi = np.array(self.upper) - margin
        return np.all((pos >= lo - 1e-12) & (pos <= hi + 1e-12), axis=-1)

    @classmethod
    def unit(cls, n: int) -> "Grid2":
        """n x n grid on the unit square"""
        return cls(n, n, 1.0 / (n - 1))

    @classmethod
    def covering(cls, points: np.ndarray, n: int = 32, margin: float = 0.25) -> "Grid2":
        """
        Square n x n grid covering a point cloud with a relative margin

        Example:
            >>> Grid2.covering(np.array([[0.0, 0.0], [1.0, 1.0]]), n=11, margin=0.0).h
            0.1
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        side = float(max(hi - lo)) or 1.0
        side *= 1.0 + 2.0 * margin
        center = 0.5 * (lo + hi)
        origin = center - 0.5 * side
        return cls(n, n, side / (n - 1), (origin[0], origin[1]))


def _check_grid(a: Grid2, b: Grid2) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Scalar values on a grid, shape (nx, ny)"""
    grid: Grid2
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != self.grid.shape:
            raise ValueError(f"scalar field shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("scalar field contains non-finite values")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: Grid2, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "ScalarField":
        pos = grid.nodes()
        return cls(grid, np.broadcast_to(fn(pos[..., 0], pos[..., 1]), grid.shape))


@dataclass(frozen=True, eq=False)
class VectorField:
    """Vector values (vx, vy) on a grid, shape (nx, ny, 2)"""
    grid: Grid2
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != self.grid.shape + (2,):
            raise ValueError(f"vector field shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("vector field contains non-finite values")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: Grid2) -> "VectorField":
        return cls(grid, np.zeros(grid.shape + (2,)))

    @classmethod
    def from_function(cls, grid: Grid2, fn: Callable[[np.ndarray, np.ndarray], Tuple]) -> "VectorField":
        """Sample fn(X, Y) -> (vx, vy) at the grid nodes"""
        pos = grid.nodes()
        vx, vy = fn(pos[..., 0], pos[..., 1])
        return cls(grid, np.stack([np.broadcast_to(vx, grid.shape), np.broadcast_to(vy, grid.shape)], axis=-1))

    def __add__(self, other: "VectorField") -> "VectorField":
        _check_grid(self.grid, other.grid)
        return VectorField(self.grid, self.values + other.values)

    def __sub__(self, other: "VectorField") -> "VectorField":
        _check_grid(self.grid, other.grid)
        return VectorField(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "VectorField":
        return VectorField(self.grid, float(scalar) * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "VectorField":
        return VectorField(self.grid, -self.values)

    def sup_norm(self, mask: np.ndarray = None) -> float:
        norms = np.linalg.norm(self.values, axis=-1)
        if mask is not None:
            norms = norms[mask]
        return float(norms.max()) if norms.size else 0.0


@dataclass(frozen=True, eq=False)
class LandmarkSet:
    """Ordered landmark positions with stable integer ids"""
    points: np.ndarray
    ids: Tuple[int, ...] = None

    def __post_init__(self):
        pts = _frozen(np.asarray(self.points, dtype=float).reshape(-1, 2))
        if not np.all(np.isfinite(pts)):
            raise ValueError("landmarks contain non-finite coordinates")
        ids = tuple(range(len(pts))) if self.ids is None else tuple(int(i) for i in self.ids)
        if len(ids) != len(pts):
            raise ValueError(f"{len(ids)} ids for {len(pts)} landmarks")
        if len(pts) > 1:
            scale = max(1.0, float(np.ptp(pts)))
            d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
            d[np.diag_indices(len(pts))] = np.inf
            if d.min() <= 1e-12 * scale:
                raise ValueError("two landmarks coincide")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return len(self.points)

    def moved_to(self, points: np.ndarray) -> "LandmarkSet":
        """Same ids, new positions"""
        return LandmarkSet(points, self.ids)


Field = Union[ScalarField, VectorField]


def _interpolate_index(values: np.ndarray, u: np.ndarray, v: np.ndarray, fade: bool) -> np.ndarray:
    nx, ny = values.shape[:2]
    uc = np.clip(u, 0.0, nx - 1)
    vc = np.clip(v, 0.0, ny - 1)
    i0 = np.minimum(np.floor(uc).astype(int), nx - 2)
    j0 = np.minimum(np.floor(vc).astype(int), ny - 2)
    tu = uc - i0
    tv = vc - j0
    extra = values.ndim - 2
    tu_b = tu.reshape(tu.shape + (1,) * extra)
    tv_b = tv.reshape(tv.shape + (1,) * extra)
    out = ((1.0 - tu_b) * (1.0 - tv_b) * values[i0, j0]
           + tu_b * (1.0 - tv_b) * values[i0 + 1, j0]
           + (1.0 - tu_b) * tv_b * values[i0, j0 + 1]
           + tu_b * tv_b * values[i0 + 1, j0 + 1])
    if fade:
        ou = np.maximum(np.maximum(-u, u - (nx - 1)), 0.0)
        ov = np.maximum(np.maximum(-v, v - (ny - 1)), 0.0)
        factor = np.clip(1.0 - ou, 0.0, 1.0) * np.clip(1.0 - ov, 0.0, 1.0)
        out = out * factor.reshape(factor.shape + (1,) * extra)
    return out


def interpolate_values(values: np.ndarray, grid: Grid2, x: np.ndarray, fade: bool) -> np.ndarray:
    """
    Bilinear interpolation of raw node values at points x (..., 2)

    Queries are clamped to the grid; with fade=True the result is additionally
    scaled linearly to zero over one cell outside the boundary.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidQueryError("invalid query point")
    u = (x[..., 0] - grid.origin[0]) / grid.h
    v = (x[..., 1] - grid.origin[1]) / grid.h
    return _interpolate_index(values, u, v, fade)


def interpolate_at_offsets(values: np.ndarray, grid: Grid2, offsets: np.ndarray, fade: bool) -> np.ndarray:
    """
    Interpolate node values at node + offset for every node, offsets shaped (nx, ny, 2)

    Works in index space, so zero offsets return the node values exactly.
    """
    offsets = np.asarray(offsets, dtype=float)
    if not np.all(np.isfinite(offsets)):
        raise InvalidQueryError("invalid query point")
    ii, jj = np.meshgrid(np.arange(grid.nx), np.arange(grid.ny), indexing="ij")
    u = ii + offsets[..., 0] / grid.h
    v = jj + offsets[..., 1] / grid.h
    return _interpolate_index(values, u, v, fade)


def interpolate(f: Field, x) -> np.ndarray:
    """
    Evaluate a field at arbitrary points by bilinear interpolation

    Scalar fields clamp queries to the boundary; vector fields fade to zero
    over one cell beyond it.

    Args:
        f: ScalarField or VectorField
        x: One point (2,) or an array of points (..., 2)

    Returns:
        Interpolated values, shape (...) for scalars and (..., 2) for vectors

    Example:
        >>> g = Grid2.unit(5)
        >>> interpolate(ScalarField.from_function(g, lambda X, Y: X), [0.25, 0.5])
        array(0.25)
    """
    return interpolate_values(f.values, f.grid, np.asarray(x, dtype=float), fade=isinstance(f, VectorField))


def jacobian_of_values(values: np.ndarray, h: float) -> np.ndarray:
    """
    Per-node Jacobian J[..., a, b] = d values_a / d x_b of an (nx, ny, 2) array

    Central differences inside, first-order one-sided differences on the boundary.
    """
    if values.shape[0] < 3 or values.shape[1] < 3:
        raise ValueError("jacobian needs a grid with at least 3x3 nodes")
    jac = np.empty(values.shape[:2] + (2, 2))
    for a in range(2):
        dx, dy = np.gradient(values[..., a], h, h, edge_order=1)
        jac[..., a, 0] = dx
        jac[..., a, 1] = dy
    return jac


def jacobian(v: VectorField) -> np.ndarray:
    """
    Jacobian matrices of a vector field at every node

    Args:
        v: Vector field on a grid with nx, ny >= 3

    Returns:
        (nx, ny, 2, 2) array with J[i, j, a, b] = d v_a / d x_b at node (i, j)
    """
    return jacobian_of_values(v.values, v.grid.h)


def lie_bracket(u: VectorField, v: VectorField) -> VectorField:
    """
    Vector-field bracket [u, v] = Du.v - Dv.u

    Example:
        >>> g = Grid2.unit(9)
        >>> u = VectorField.from_function(g, lambda X, Y: (X, 0 * X))
        >>> v = VectorField.from_function(g, lambda X, Y: (0 * X, X))
        >>> bool(np.allclose(lie_bracket(u, v).values[..., 1], -g.nodes()[..., 0]))
        True
    """
    _check_grid(u.grid, v.grid)
    du = jacobian(u)
    dv = jacobian(v)
    out = np.einsum("...ab,...b->...a", du, v.values) - np.einsum("...ab,...b->...a", dv, u.values)
    return VectorField(u.grid, out)


def integrate_scale(samples: Sequence[Tuple[float, VectorField]]) -> VectorField:
    """
    Weighted sum of vector fields, accumulated left to right

    Args:
        samples: Non-empty list of (weight, field) pairs on one grid, weights >= 0

    Returns:
        VectorField: sum of weight * field
    """
    samples = list(samples)
    if not samples:
        raise ValueError("integrate_scale needs at least one sample")
    grid = samples[0][1].grid
    acc = None
    for weight, fld in samples:
        if weight < 0:
            raise ValueError(f"negative scale weight {weight}")
        _check_grid(grid, fld.grid)
        term = weight * fld.values
        acc = term if acc is None else acc + term
    return VectorField(grid, acc)
