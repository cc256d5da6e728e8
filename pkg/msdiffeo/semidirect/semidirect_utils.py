"""
Iterated semidirect products in both scale orderings, their reorder isomorphism,
trivializations and the reconstruction of per-scale diffeomorphisms
"""

import logging
from dataclasses import dataclass
from functools import singledispatch
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import GridMismatchError, OrderingMismatchError
from ..fields import Grid2, interpolate_at_offsets, interpolate_values, jacobian_of_values
from ..flows import (
    Diffeomorphism, FlowPath, TimeIntegrator, compose, compose_all, integrate_flow, step_map
)
from .matrix_utils import COARSE_FIRST, COARSE_LAST, ORDERINGS, MatrixGroupElement

logger = logging.getLogger(__name__)

Element = Union[MatrixGroupElement, Diffeomorphism]

DIRECT = "direct"


@singledispatch
def _mul(a, b):
    raise TypeError(f"unsupported group element {type(a).__name__}")


@_mul.register
def _(a: MatrixGroupElement, b):
    return a @ b


@_mul.register
def _(a: Diffeomorphism, b):
    return compose(a, b)


@singledispatch
def _inv(a):
    raise TypeError(f"unsupported group element {type(a).__name__}")


@_inv.register
def _(a: MatrixGroupElement):
    return a.inverse()


@_inv.register
def _(a: Diffeomorphism):
    return a.inverse()


@singledispatch
def _identity_like(a):
    raise TypeError(f"unsupported group element {type(a).__name__}")


@_identity_like.register
def _(a: MatrixGroupElement):
    return MatrixGroupElement.identity()


@_identity_like.register
def _(a: Diffeomorphism):
    return Diffeomorphism.identity(a.grid)


def _product(elements: Sequence[Element]) -> Optional[Element]:
    """Left-to-right product; None stands for the identity of an empty product"""
    out = None
    for e in elements:
        out = e if out is None else _mul(out, e)
    return out


def _conjugate(g: Optional[Element], x: Element) -> Element:
    """c_g x = g x g^{-1}"""
    if g is None:
        return x
    return _mul(_mul(g, x), _inv(g))


def _times(a: Optional[Element], b: Element) -> Element:
    return b if a is None else _mul(a, b)


@dataclass(frozen=True, eq=False)
class SdpTuple:
    """
    Element (g_1, ..., g_n) of an iterated semidirect product

    coarse_last: G_1 contains G_2 ... contains G_n; coarse_first: G_1 inside G_2 ... inside G_n.
    The "direct" tag marks plain direct-product tuples produced by the trivializations.
    """
    elements: Tuple[Element, ...]
    ordering: str = COARSE_LAST

    def __post_init__(self):
        elems = tuple(self.elements)
        if not elems:
            raise ValueError("a semidirect tuple needs at least one element")
        if self.ordering not in ORDERINGS + (DIRECT,):
            raise ValueError(f"unknown ordering {self.ordering!r}")
        object.__setattr__(self, "elements", elems)

    def __len__(self) -> int:
        return len(self.elements)

    @classmethod
    def identity(cls, like: Element, n: int, ordering: str = COARSE_LAST) -> "SdpTuple":
        e = _identity_like(like)
        return cls(tuple(e for _ in range(n)), ordering)


def _check_pair(a: SdpTuple, b: SdpTuple) -> None:
    if a.ordering != b.ordering or len(a) != len(b):
        raise OrderingMismatchError(
            f"cannot combine {a.ordering} tuple of length {len(a)} with {b.ordering} tuple of length {len(b)}")


def sdp_multiply(a: SdpTuple, b: SdpTuple) -> SdpTuple:
    """
    Semidirect product of two tuples

    coarse_last:  (a b)_k = a_k c_{a_{k+1}...a_n} b_k
    coarse_first: (a b)_k = c_{(b_1...b_{k-1})^{-1}} a_k  b_k
    direct:       (a b)_k = a_k b_k

    Raises:
        OrderingMismatchError: Orderings or lengths differ
    """
    _check_pair(a, b)
    n = len(a)
    g, h = a.elements, b.elements
    if a.ordering == DIRECT:
        out = [_mul(x, y) for x, y in zip(g, h)]
    elif a.ordering == COARSE_LAST:
        out = [_mul(g[k], _conjugate(_product(g[k + 1:]), h[k])) for k in range(n)]
    else:
        out = []
        for k in range(n):
            prefix = _product(h[:k])
            out.append(_mul(_conjugate(None if prefix is None else _inv(prefix), g[k]), h[k]))
    return SdpTuple(tuple(out), a.ordering)


def sdp_inverse(a: SdpTuple) -> SdpTuple:
    """
    Group inverse

    coarse_last:  (a^{-1})_k = c_{(a_{k+1}...a_n)^{-1}} a_k^{-1}
    coarse_first: (a^{-1})_k = c_{a_1...a_{k-1}} a_k^{-1}
    """
    g = a.elements
    n = len(g)
    if a.ordering == DIRECT:
        out = [_inv(x) for x in g]
    elif a.ordering == COARSE_LAST:
        out = []
        for k in range(n):
            suffix = _product(g[k + 1:])
            out.append(_conjugate(None if suffix is None else _inv(suffix), _inv(g[k])))
    else:
        out = [_conjugate(_product(g[:k]), _inv(g[k])) for k in range(n)]
    return SdpTuple(tuple(out), a.ordering)


def reorder_hom(a: SdpTuple) -> SdpTuple:
    """
    Isomorphism from the coarse-last to the coarse-first product

    Phi(g)_k = c_{(g_{n+2-k}...g_n)^{-1}} g_{n+1-k}, so Phi(g)_1 = g_n
    """
    if a.ordering != COARSE_LAST:
        raise OrderingMismatchError("reorder_hom expects a coarse_last tuple")
    g = a.elements
    n = len(g)
    out = []
    for k in range(1, n + 1):
        suffix = _product(g[n + 1 - k:])
        out.append(_conjugate(None if suffix is None else _inv(suffix), g[n - k]))
    return SdpTuple(tuple(out), COARSE_FIRST)


def reorder_hom_inverse(a: SdpTuple) -> SdpTuple:
    """Inverse of reorder_hom: g_{n+1-k} = c_{h_1...h_{k-1}} h_k"""
    if a.ordering != COARSE_FIRST:
        raise OrderingMismatchError("reorder_hom_inverse expects a coarse_first tuple")
    h = a.elements
    n = len(h)
    out = [None] * n
    for k in range(n):
        out[n - 1 - k] = _conjugate(_product(h[:k]), h[k])
    return SdpTuple(tuple(out), COARSE_LAST)


def reorder_tangent(velocities: Sequence) -> list:
    """Derivative of the reorder isomorphism at the identity: reverses the scale order"""
    return list(velocities)[::-1]


def trivialize(a: SdpTuple, which: str) -> SdpTuple:
    """
    Trivializations into the direct product

    T1 (coarse_last tuples): (g_1 ... g_n, g_2 ... g_n, ..., g_n)
    T2 (coarse_first tuples): (h_1, h_1 h_2, ..., h_1 ... h_n)

    With h = reorder_hom(g), T2(h) lists the factors of T1(g) in reverse order.

    Example:
        >>> g = SdpTuple((MatrixGroupElement(2 * np.eye(3)), MatrixGroupElement(np.eye(3), "unipotent")))
        >>> float(trivialize(g, "T1").elements[0].matrix[0, 0])
        2.0
    """
    g = a.elements
    n = len(g)
    if which == "T1":
        if a.ordering != COARSE_LAST:
            raise OrderingMismatchError("T1 applies to coarse_last tuples")
        out = [_product(g[k:]) for k in range(n)]
    elif which == "T2":
        if a.ordering != COARSE_FIRST:
            raise OrderingMismatchError("T2 applies to coarse_first tuples")
        out = [_product(g[:k + 1]) for k in range(n)]
    else:
        raise ValueError(f"unknown trivialization {which!r}")
    return SdpTuple(tuple(out), DIRECT)


@dataclass(frozen=True, eq=False)
class ScaleTuple:
    """
    Per-scale velocity paths (v_1(t), ..., v_n(t)) on one grid and one time grid

    coarse_last: v_1 finest; coarse_first: v_1 coarsest.
    """
    paths: Tuple[FlowPath, ...]
    ordering: str = COARSE_FIRST

    def __post_init__(self):
        paths = tuple(self.paths)
        if not paths:
            raise ValueError("a scale tuple needs at least one path")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"unknown ordering {self.ordering!r}")
        for p in paths[1:]:
            if p.grid != paths[0].grid:
                raise GridMismatchError(f"grid mismatch: {paths[0].grid} vs {p.grid}")
            if p.n_steps != paths[0].n_steps:
                raise ValueError("scale paths have different time grids")
        object.__setattr__(self, "paths", paths)

    def __len__(self) -> int:
        return len(self.paths)

    @property
    def grid(self) -> Grid2:
        return self.paths[0].grid

    @property
    def n_steps(self) -> int:
        return self.paths[0].n_steps

    def total(self) -> FlowPath:
        """Sum of all scales, accumulated in tuple order"""
        out = self.paths[0]
        for p in self.paths[1:]:
            out = out + p
        return out

    def reversed(self) -> "ScaleTuple":
        other = COARSE_FIRST if self.ordering == COARSE_LAST else COARSE_LAST
        return ScaleTuple(tuple(reorder_tangent(self.paths)), other)


def _step_tuple(st: ScaleTuple, m: int, integrator: TimeIntegrator, ordering: str) -> SdpTuple:
    times = st.paths[0].times
    maps = tuple(step_map(p, st.grid, float(times[m]), float(times[m + 1]), integrator) for p in st.paths)
    return SdpTuple(maps, ordering)


def _reconstruct_product(st: ScaleTuple, integrator: TimeIntegrator, ordering: str) -> List[List[Diffeomorphism]]:
    n = len(st)
    g = SdpTuple.identity(Diffeomorphism.identity(st.grid), n, ordering)
    history = [[e] for e in g.elements]
    for m in range(st.n_steps):
        g = sdp_multiply(_step_tuple(st, m, integrator, ordering), g)
        for k, e in enumerate(g.elements):
            history[k].append(e)
    return history


def _partial_sums(values: List[np.ndarray], reverse: bool) -> List[np.ndarray]:
    """Sum of the other scales strictly after (reverse=True) or before each index"""
    n = len(values)
    out = []
    for k in range(n):
        idx = range(k + 1, n) if reverse else range(k)
        acc = np.zeros_like(values[0])
        for i in idx:
            acc = acc + values[i]
        out.append(acc)
    return out


def _rhs_coarse_last(st: ScaleTuple, state: np.ndarray, t: float) -> np.ndarray:
    grid = st.grid
    nodes = grid.nodes()
    vals = [p.values_at(t) for p in st.paths]
    coarser = _partial_sums(vals, reverse=True)
    out = np.empty_like(state)
    for k in range(len(vals)):
        disp = state[k] - nodes
        moved = interpolate_at_offsets(vals[k] + coarser[k], grid, disp, fade=True)
        jac = np.eye(2) + jacobian_of_values(disp, grid.h)
        out[k] = moved - np.einsum("...ab,...b->...a", jac, coarser[k])
    return out


def _rhs_coarse_first(st: ScaleTuple, state: np.ndarray, t: float) -> np.ndarray:
    grid = st.grid
    nodes = grid.nodes()
    out = np.empty_like(state)
    prefix = None
    for k, path in enumerate(st.paths):
        y = state[k]
        if prefix is None:
            out[k] = interpolate_values(path.values_at(t), grid, y, fade=True)
            prefix = Diffeomorphism(grid, y)
            continue
        py = y + interpolate_values(prefix.displacement, grid, y, fade=True)
        jac = interpolate_values(prefix.jacobian(), grid, y, fade=False)
        v = interpolate_values(path.values_at(t), grid, py, fade=True)
        out[k] = np.linalg.solve(jac, v[..., None])[..., 0]
        prefix = compose(prefix, Diffeomorphism(grid, y))
    return out


def _reconstruct_ode(st: ScaleTuple, integrator: TimeIntegrator, ordering: str) -> List[List[Diffeomorphism]]:
    grid = st.grid
    rhs = _rhs_coarse_last if ordering == COARSE_LAST else _rhs_coarse_first
    state = np.stack([grid.nodes()] * len(st))
    times = st.paths[0].times
    history = [[Diffeomorphism.identity(grid)] for _ in range(len(st))]
    for m in range(st.n_steps):
        state = integrator.advance(lambda x, t: rhs(st, x, t), state, float(times[m]), float(times[m + 1]))
        for k in range(len(st)):
            history[k].append(Diffeomorphism(grid, state[k]))
    return history


def _reconstruct(st: ScaleTuple, integrator: Optional[TimeIntegrator], scheme: str, ordering: str):
    integrator = integrator or TimeIntegrator()
    if len(st) == 1:
        return [integrate_flow(st.paths[0], integrator)]
    if scheme == "product":
        return _reconstruct_product(st, integrator, ordering)
    if scheme == "ode":
        return _reconstruct_ode(st, integrator, ordering)
    raise ValueError(f"unknown reconstruction scheme {scheme!r}")


def reconstruct_coarse_last(st: ScaleTuple, integrator: Optional[TimeIntegrator] = None,
                            scheme: str = "product", convention: str = "fine_outer") -> List[List[Diffeomorphism]]:
    """
    Per-scale diffeomorphisms psi_k(t) for the coarse-last product

    convention="fine_outer": psi_n is the plain flow of v_n, each psi_k solves
        d/dt psi_k = (v_k + (Id - Ad_{psi_k}) sum_{i>k} v_i) o psi_k
    and phi = psi_1 o ... o psi_n.
    convention="coarse_outer": indices reversed, psi_1 the plain flow of v_1 with sums over i<k
    and phi = psi_n o ... o psi_1.

    scheme="product" advances g <- h g with h the one-step flows of the scales (first order
    splitting); scheme="ode" integrates the coupled equations by the method of lines.

    Returns:
        list: for every scale, the list of psi_k at each time node
    """
    if convention == "coarse_outer":
        rev = ScaleTuple(tuple(reorder_tangent(st.paths)), COARSE_LAST)
        return reorder_tangent(reconstruct_coarse_last(rev, integrator, scheme, "fine_outer"))
    if convention != "fine_outer":
        raise ValueError(f"unknown convention {convention!r}")
    return _reconstruct(st, integrator, scheme, COARSE_LAST)


def reconstruct_coarse_first(st: ScaleTuple, integrator: Optional[TimeIntegrator] = None,
                             scheme: str = "product") -> List[List[Diffeomorphism]]:
    """
    Per-scale diffeomorphisms for the coarse-first product,
    d/dt psi_k = (Ad_{(psi_1 o ... o psi_{k-1})^{-1}} v_k) o psi_k, phi = psi_1 o ... o psi_n
    """
    return _reconstruct(st, integrator, scheme, COARSE_FIRST)


def reconstructed_total(psi: List[List[Diffeomorphism]], ordering: str, convention: str = "fine_outer",
                        m: int = -1) -> Diffeomorphism:
    """Composition of the per-scale maps at time node m that should equal the flow of the summed velocity"""
    maps = [scale[m] for scale in psi]
    if ordering == COARSE_LAST and convention == "coarse_outer":
        maps = maps[::-1]
    return compose_all(maps)


def diagram_residual(st: ScaleTuple, psi: List[List[Diffeomorphism]], integrator: Optional[TimeIntegrator] = None,
                     convention: str = "fine_outer", mask: Optional[np.ndarray] = None) -> float:
    """
    sup-distance at t = 1 between the composed per-scale maps and the flow of sum_i v_i
    """
    direct = integrate_flow(st.total(), integrator)[-1]
    total = reconstructed_total(psi, st.ordering, convention)
    residual = total.sup_distance(direct, mask)
    logger.debug(f"Diagram residual {residual:.3e} for {len(st)} scales")
    return residual
