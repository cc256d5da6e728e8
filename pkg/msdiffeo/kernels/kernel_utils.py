"""
Reproducing-kernel utilities: Gaussian mixtures, scale continua, Gram systems and momentum solves
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.sparse.linalg import LinearOperator, cg

from ..exceptions import EmptyBinError, IllConditionedKernelError
from ..fields import Grid2, LandmarkSet, VectorField

logger = logging.getLogger(__name__)

DEFAULT_JITTER = 1e-10
GRID_CG_TOL = 1e-8


@dataclass(frozen=True)
class GaussianKernel:
    """
    Scalar Gaussian kernel weight * exp(-|x - y|^2 / (2 sigma^2)), acting as a multiple of Id_2

    Args:
        sigma: Standard deviation in grid length units (> 0)
        weight: Positive multiplier
    """
    sigma: float
    weight: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"kernel sigma must be positive, got {self.sigma}")
        if not self.weight > 0:
            raise ValueError(f"kernel weight must be positive, got {self.weight}")

    @property
    def terms(self) -> Tuple["GaussianKernel", ...]:
        return (self,)


@dataclass(frozen=True)
class BinnedKernel:
    """One scale made of several Gaussian terms, e.g. a bin of a scale continuum"""
    terms: Tuple[GaussianKernel, ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("a binned kernel needs at least one term")
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def sigma(self) -> float:
        return max(t.sigma for t in self.terms)

    @property
    def weight(self) -> float:
        return float(sum(t.weight for t in self.terms))


Component = Union[GaussianKernel, BinnedKernel]


@dataclass(frozen=True)
class FiniteKernelSpec:
    """
    Finite mixture K = sum_i K_i, components ordered coarse to fine (strictly decreasing sigma)
    """
    components: Tuple[Component, ...]
    jitter: float = DEFAULT_JITTER
    mode: str = field(default="finite", init=False)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a finite kernel spec needs at least one component")
        sigmas = [c.sigma for c in comps]
        if any(b >= a for a, b in zip(sigmas, sigmas[1:])):
            raise ValueError(f"component sigmas must be strictly decreasing, got {sigmas}")
        object.__setattr__(self, "components", comps)

    @property
    def terms(self) -> Tuple[GaussianKernel, ...]:
        return tuple(t for c in self.components for t in c.terms)

    def scales(self) -> List["FiniteKernelSpec"]:
        """Single-component specs, one per scale, coarse to fine"""
        return [FiniteKernelSpec((c,), self.jitter) for c in self.components]


def geometric_sigma(sigma_min: float, sigma_max: float, s_min: float = 0.0, s_max: float = 1.0) -> Callable[[float], float]:
    """sigma(s) = sigma_max^(1-u) * sigma_min^u with u the normalized scale in [0, 1]"""
    def sigma_of_s(s: float) -> float:
        u = (s - s_min) / (s_max - s_min)
        return float(sigma_max ** (1.0 - u) * sigma_min ** u)
    return sigma_of_s


@dataclass(frozen=True)
class ContinuumKernelSpec:
    """
    Quadrature of a scale continuum K = int K_s dlambda(s) ~ sum_j lambda_j K_{sigma(s_j)}

    Args:
        s_min, s_max: Scale interval, 0 < s_min < s_max is not required for s_min = 0
        nodes: (s_j, lambda_j) pairs, s_j strictly increasing inside [s_min, s_max], lambda_j > 0
        sigma_min, sigma_max: Endpoints of the default geometric sigma map
        sigma_map: Optional custom monotone map s -> sigma
    """
    s_min: float
    s_max: float
    nodes: Tuple[Tuple[float, float], ...]
    sigma_min: float
    sigma_max: float
    sigma_map: Optional[Callable[[float], float]] = field(default=None, compare=False)
    jitter: float = DEFAULT_JITTER
    mode: str = field(default="continuum", init=False)

    def __post_init__(self):
        if not (self.s_min >= 0 and self.s_max > self.s_min):
            raise ValueError(f"invalid scale interval [{self.s_min}, {self.s_max}]")
        nodes = tuple((float(s), float(w)) for s, w in self.nodes)
        if not nodes:
            raise ValueError("a continuum kernel spec needs quadrature nodes")
        s_vals = [s for s, _ in nodes]
        if any(b <= a for a, b in zip(s_vals, s_vals[1:])):
            raise ValueError("quadrature nodes must be strictly increasing")
        if s_vals[0] < self.s_min or s_vals[-1] > self.s_max:
            raise ValueError("quadrature nodes must lie inside the scale interval")
        if any(w <= 0 for _, w in nodes):
            raise ValueError("quadrature weights must be positive")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def midpoint(cls, s_min: float, s_max: float, n_nodes: int, sigma_min: float, sigma_max: float,
                 sigma_map: Optional[Callable[[float], float]] = None,
                 density: Optional[Callable[[float], float]] = None,
                 jitter: float = DEFAULT_JITTER) -> "ContinuumKernelSpec":
        """
        Midpoint rule on n_nodes uniform cells; lambda_j = ds * density(s_j) (Lebesgue by default)

        Example:
            >>> spec = ContinuumKernelSpec.midpoint(0.0, 1.0, 4, 0.05, 0.25)
            >>> [round(s, 3) for s, _ in spec.nodes]
            [0.125, 0.375, 0.625, 0.875]
        """
        ds = (s_max - s_min) / n_nodes
        nodes = []
        for j in range(n_nodes):
            s = s_min + (j + 0.5) * ds
            nodes.append((s, ds * (density(s) if density else 1.0)))
        return cls(s_min, s_max, tuple(nodes), sigma_min, sigma_max, sigma_map, jitter)

    def sigma_of_s(self, s: float) -> float:
        if self.sigma_map is not None:
            return float(self.sigma_map(s))
        return geometric_sigma(self.sigma_min, self.sigma_max, self.s_min, self.s_max)(s)

    @property
    def scale_values(self) -> np.ndarray:
        return np.array([s for s, _ in self.nodes])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.nodes])

    @property
    def terms(self) -> Tuple[GaussianKernel, ...]:
        return tuple(GaussianKernel(self.sigma_of_s(s), w) for s, w in self.nodes)

    def node_kernels(self) -> List[FiniteKernelSpec]:
        """One single-term spec per quadrature node (the kernel lambda_j K_{s_j})"""
        return [FiniteKernelSpec((t,), self.jitter) for t in self.terms]


KernelSpec = Union[FiniteKernelSpec, ContinuumKernelSpec]


def uniform_partition(s_min: float, s_max: float, n_bins: int) -> List[float]:
    """Cutoffs s_min = t_0 < ... < t_n = s_max"""
    if n_bins < 1:
        raise ValueError("a partition needs at least one bin")
    return [s_min + (s_max - s_min) * k / n_bins for k in range(n_bins + 1)]


def bin_indices(scale_values: Sequence[float], partition: Sequence[float]) -> List[List[int]]:
    """
    Indices of the scale nodes falling in each interval [t_{k-1}, t_k) (last one closed)
    """
    cuts = list(partition)
    if len(cuts) < 2 or any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise ValueError(f"partition must be strictly increasing, got {cuts}")
    bins = []
    for k in range(1, len(cuts)):
        lo, hi = cuts[k - 1], cuts[k]
        last = k == len(cuts) - 1
        idx = [j for j, s in enumerate(scale_values) if lo <= s < hi or (last and s == hi)]
        if not idx:
            raise EmptyBinError(f"scale bin [{lo}, {hi}] holds no quadrature node; refine quadrature or coarsen partition")
        bins.append(idx)
    covered = sum(len(b) for b in bins)
    if covered != len(scale_values):
        raise ValueError("partition does not cover every quadrature node")
    return bins


def bin_continuum(spec: ContinuumKernelSpec, partition: Sequence[float]) -> FiniteKernelSpec:
    """
    Finite mixture whose k-th component is sum_{s_j in I_k} lambda_j K_{s_j}

    The flattened term order equals the continuum node order, so Gram matrices of the
    binned spec and of the continuum are bit-identical.
    """
    terms = spec.terms
    comps = tuple(BinnedKernel(tuple(terms[j] for j in idx)) for idx in bin_indices(spec.scale_values, partition))
    return FiniteKernelSpec(comps, spec.jitter)


def _kernel_terms(spec) -> Tuple[GaussianKernel, ...]:
    return spec.terms


def scalar_kernel(spec, sqdist: np.ndarray) -> np.ndarray:
    """Scalar kernel value for an array of squared distances, terms accumulated in order"""
    out = np.zeros_like(sqdist, dtype=float)
    for term in _kernel_terms(spec):
        out = out + term.weight * np.exp(-sqdist / (2.0 * term.sigma ** 2))
    return out


def scalar_kernel_slope(spec, sqdist: np.ndarray) -> np.ndarray:
    """d k / d x for k(x, y) is slope * (x - y); slope = -sum_t w_t / sigma_t^2 exp(...)"""
    out = np.zeros_like(sqdist, dtype=float)
    for term in _kernel_terms(spec):
        out = out - (term.weight / term.sigma ** 2) * np.exp(-sqdist / (2.0 * term.sigma ** 2))
    return out


def _sqdist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    return np.sum(diff * diff, axis=-1)


def scalar_gram(spec, x: np.ndarray, y: Optional[np.ndarray] = None) -> np.ndarray:
    """Scalar Gram matrix k(x_a, y_b) between two point arrays (n, 2), (m, 2)"""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    y = x if y is None else np.asarray(y, dtype=float).reshape(-1, 2)
    return scalar_kernel(spec, _sqdist(x, y))


def kernel_eval(spec: KernelSpec, x, y) -> np.ndarray:
    """
    2x2 kernel matrix K(x, y) = k(x, y) Id_2

    Example:
        >>> kernel_eval(FiniteKernelSpec((GaussianKernel(0.3, 2.0),)), [0, 0], [0, 0])
        array([[2., 0.],
               [0., 2.]])
    """
    k = scalar_gram(spec, np.asarray(x, dtype=float), np.asarray(y, dtype=float))[0, 0]
    return k * np.eye(2)


@dataclass(frozen=True, eq=False)
class GramSystem:
    """2n x 2n block Gram matrix with blocks K(x_a, x_b) = k_ab Id_2"""
    points: LandmarkSet
    matrix: np.ndarray
    jitter: float

    @property
    def scalar(self) -> np.ndarray:
        return self.matrix[0::2, 0::2]


def build_gram(spec, points: LandmarkSet) -> GramSystem:
    """Gram system of a kernel spec on a landmark set, jitter = rel * trace / (2n)"""
    g = scalar_gram(spec, points.points)
    matrix = np.kron(g, np.eye(2))
    jitter = spec.jitter * np.trace(matrix) / matrix.shape[0]
    return GramSystem(points, matrix, float(jitter))


@dataclass(frozen=True, eq=False)
class Momentum:
    """
    Covectors attached to landmarks (n, 2) or grid nodes (nx, ny, 2)

    The pairing with a velocity v is sum_a <p_a, v(x_a)> for landmarks and
    h^2 sum_nodes <p, v> for grids.
    """
    carrier: Union[LandmarkSet, Grid2]
    covectors: np.ndarray

    def __post_init__(self):
        cov = np.array(self.covectors, dtype=float)
        expected = (len(self.carrier), 2) if isinstance(self.carrier, LandmarkSet) else self.carrier.shape + (2,)
        if cov.shape != expected:
            raise ValueError(f"momentum shape {cov.shape} does not match carrier {expected}")
        if not np.all(np.isfinite(cov)):
            raise ValueError("momentum contains non-finite values")
        cov.setflags(write=False)
        object.__setattr__(self, "covectors", cov)

    @property
    def on_grid(self) -> bool:
        return isinstance(self.carrier, Grid2)

    def pairing(self, velocity: np.ndarray) -> float:
        s = float(np.sum(self.covectors * velocity))
        return s * self.carrier.h ** 2 if self.on_grid else s


def _grid_axis_kernel(term: GaussianKernel, n: int, h: float) -> np.ndarray:
    d = h * (np.arange(n)[:, None] - np.arange(n)[None, :])
    return np.exp(-d * d / (2.0 * term.sigma ** 2))


def _apply_grid(spec, grid: Grid2, covectors: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.shape + (2,))
    for term in _kernel_terms(spec):
        kx = _grid_axis_kernel(term, grid.nx, grid.h)
        ky = _grid_axis_kernel(term, grid.ny, grid.h)
        for c in range(2):
            out[..., c] = out[..., c] + (term.weight * grid.h ** 2) * (kx @ covectors[..., c] @ ky.T)
    return out


def apply_kernel(spec: KernelSpec, p: Momentum, at=None):
    """
    Velocity generated by a momentum, v(x) = sum_a K(x, x_a) p_a or its grid convolution

    Args:
        spec: Kernel spec
        p: Momentum on landmarks or on a grid
        at: Where to evaluate a landmark momentum: None (the carrier points),
            a Grid2 (returns a VectorField) or an (m, 2) point array

    Returns:
        (n, 2) / (m, 2) velocity values, or a VectorField for grid outputs
    """
    if p.on_grid:
        return VectorField(p.carrier, _apply_grid(spec, p.carrier, p.covectors))
    centers = p.carrier.points
    if at is None:
        return scalar_gram(spec, centers) @ p.covectors
    if isinstance(at, Grid2):
        nodes = at.nodes().reshape(-1, 2)
        vals = scalar_gram(spec, nodes, centers) @ p.covectors
        return VectorField(at, vals.reshape(at.shape + (2,)))
    pts = np.asarray(at, dtype=float).reshape(-1, 2)
    return scalar_gram(spec, pts, centers) @ p.covectors


def _cholesky(matrix: np.ndarray):
    try:
        return cho_factor(matrix, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as e:
        raise IllConditionedKernelError(
            "ill-conditioned kernel system; increase jitter or separate points") from e


def solve_momentum(spec: KernelSpec, v_at_points, points: Union[LandmarkSet, Grid2]) -> Momentum:
    """
    Invert the kernel: find p with K p = v

    Landmark carriers use a Cholesky solve of the jittered scalar Gram matrix (the block
    structure k_ab Id_2 decouples the two coordinates). Grid carriers use conjugate
    gradients with relative tolerance 1e-8.

    Raises:
        IllConditionedKernelError: The Gram matrix could not be factorized
    """
    if isinstance(points, Grid2):
        return _solve_grid(spec, v_at_points, points)
    v = np.asarray(v_at_points, dtype=float).reshape(len(points), 2)
    system = build_gram(spec, points)
    g = system.scalar + system.jitter * np.eye(len(points))
    factor = _cholesky(g)
    p = cho_solve(factor, v)
    if not np.all(np.isfinite(p)):
        raise IllConditionedKernelError("ill-conditioned kernel system; increase jitter or separate points")
    return Momentum(points, p)


def _solve_grid(spec, v, grid: Grid2) -> Momentum:
    values = v.values if isinstance(v, VectorField) else np.asarray(v, dtype=float)
    n = grid.nx * grid.ny * 2

    def matvec(flat):
        return _apply_grid(spec, grid, flat.reshape(grid.shape + (2,))).ravel()

    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    sol, info = cg(op, values.ravel(), rtol=GRID_CG_TOL, maxiter=10 * n)
    if info != 0:
        raise IllConditionedKernelError(
            f"ill-conditioned kernel system; increase jitter or separate points (cg info={info})")
    return Momentum(grid, sol.reshape(grid.shape + (2,)))


def project_scales(spec: FiniteKernelSpec, v_at_points, points: LandmarkSet) -> List[np.ndarray]:
    """
    Minimal-norm scale decomposition pi(v) = (K_i K^{-1} v)_i

    Returns:
        list: one (n, 2) velocity array per component, coarse to fine

    Example:
        >>> pts = LandmarkSet([[0.0, 0.0], [0.5, 0.0]])
        >>> spec = FiniteKernelSpec((GaussianKernel(0.2),))
        >>> parts = project_scales(spec, [[1.0, 0.0], [0.0, 1.0]], pts)
        >>> len(parts)
        1
    """
    if not isinstance(spec, FiniteKernelSpec):
        raise ValueError("project_scales needs a finite kernel spec")
    p = solve_momentum(spec, v_at_points, points)
    return [apply_kernel(scale, p) for scale in spec.scales()]


def rkhs_norm(spec: KernelSpec, p: Momentum) -> float:
    """Squared RKHS norm (p, K p) of the velocity generated by p"""
    v = apply_kernel(spec, p)
    vals = v.values if isinstance(v, VectorField) else v
    return max(p.pairing(vals), 0.0)
