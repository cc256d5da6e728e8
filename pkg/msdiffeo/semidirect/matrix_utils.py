"""
3x3 matrix groups used as an exact stand-in for nested diffeomorphism groups
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy.linalg import expm, solve_triangular

from ..exceptions import NotInvertibleError

logger = logging.getLogger(__name__)

# Largest to smallest subgroup
KINDS = ("gl", "upper", "unipotent")

COARSE_LAST = "coarse_last"
COARSE_FIRST = "coarse_first"
ORDERINGS = (COARSE_LAST, COARSE_FIRST)


def _is_member(matrix: np.ndarray, kind: str) -> bool:
    if kind == "gl":
        return True
    lower_zero = not np.any(np.tril(matrix, -1))
    if kind == "upper":
        return lower_zero
    return lower_zero and bool(np.all(np.diag(matrix) == 1.0))


def _wider(a: str, b: str) -> str:
    return a if KINDS.index(a) <= KINDS.index(b) else b


@dataclass(frozen=True, eq=False)
class MatrixGroupElement:
    """
    Invertible 3x3 matrix tagged with the smallest chain subgroup it is declared in

    Args:
        matrix: 3x3 real matrix
        kind: "gl", "upper" (invertible upper-triangular) or "unipotent"
              (upper-triangular with unit diagonal)
    """
    matrix: np.ndarray
    kind: str = "gl"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got {m.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown subgroup {self.kind!r}")
        if not np.all(np.isfinite(m)) or abs(np.linalg.det(m)) < 1e-12:
            raise NotInvertibleError("singular group element")
        if not _is_member(m, self.kind):
            raise ValueError(f"matrix is not in the {self.kind} subgroup")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "MatrixGroupElement":
        return cls(np.eye(3), "unipotent")

    def __matmul__(self, other: "MatrixGroupElement") -> "MatrixGroupElement":
        return MatrixGroupElement(self.matrix @ other.matrix, _wider(self.kind, other.kind))

    def inverse(self) -> "MatrixGroupElement":
        if self.kind == "gl":
            inv = np.linalg.inv(self.matrix)
        else:
            inv = solve_triangular(self.matrix, np.eye(3), lower=False, unit_diagonal=self.kind == "unipotent")
        return MatrixGroupElement(inv, self.kind)

    def distance(self, other: "MatrixGroupElement") -> float:
        return float(np.max(np.abs(self.matrix - other.matrix)))


def chain_kinds(n: int, ordering: str) -> List[str]:
    """
    Subgroup of every tuple slot: GL, upper-triangular, then unipotent

    Slot 1 is the largest group for the coarse-last ordering and the smallest
    for the coarse-first ordering.
    """
    if ordering not in ORDERINGS:
        raise ValueError(f"unknown ordering {ordering!r}")
    kinds = [KINDS[min(k, 2)] for k in range(n)]
    return kinds if ordering == COARSE_LAST else kinds[::-1]


def random_element(kind: str, rng: np.random.Generator, scale: float = 0.3) -> MatrixGroupElement:
    """Random element of a chain subgroup, close enough to Id to stay well conditioned"""
    while True:
        if kind == "gl":
            m = np.eye(3) + scale * rng.standard_normal((3, 3))
        elif kind == "upper":
            m = np.triu(scale * rng.standard_normal((3, 3)), 1) + np.diag(np.exp(scale * rng.standard_normal(3)))
        else:
            m = np.eye(3) + np.triu(scale * rng.standard_normal((3, 3)), 1)
        if np.linalg.cond(m) < 1e3:
            return MatrixGroupElement(m, kind)


def random_chain(n: int, ordering: str, rng: np.random.Generator, scale: float = 0.3) -> List[MatrixGroupElement]:
    return [random_element(kind, rng, scale) for kind in chain_kinds(n, ordering)]


def matrix_adjoint(g: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Ad_g u = g u g^{-1}"""
    return g @ u @ np.linalg.inv(g)


def matrix_bracket(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def ad_rule_residual(rng: np.random.Generator, step: float = 1e-5) -> float:
    """
    Relative error of d/dt Ad_{g(t)} u = [g' g^{-1}, Ad_{g(t)} u] by central differences

    g(t) = expm(t A) g0 with random A, g0 and u; evaluated at t = 0.
    """
    a = rng.standard_normal((3, 3))
    g0 = random_element("gl", rng).matrix
    u = rng.standard_normal((3, 3))

    def g(t):
        return expm(t * a) @ g0

    numeric = (matrix_adjoint(g(step), u) - matrix_adjoint(g(-step), u)) / (2.0 * step)
    # g'(0) g(0)^{-1} = A
    exact = matrix_bracket(a, matrix_adjoint(g(0.0), u))
    return float(np.max(np.abs(numeric - exact)) / max(np.max(np.abs(exact)), 1e-300))


def max_entry_error(a: List[MatrixGroupElement], b: List[MatrixGroupElement]) -> float:
    """Largest entrywise difference between two lists of elements"""
    if len(a) != len(b):
        raise ValueError("tuples have different lengths")
    return max(x.distance(y) for x, y in zip(a, b))
