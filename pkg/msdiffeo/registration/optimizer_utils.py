"""
Line-search descent on matching energies
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..exceptions import FlowBlowUpError
from .registration_utils import (
    SDP_COARSE_FIRST, SDP_COARSE_LAST, SIMULTANEOUS, Control, EnergyBreakdown, MatchingProblem, energy,
    image_direction, value_and_gradient
)

logger = logging.getLogger(__name__)

DIRECTIONS = ("lbfgs", "steepest")


@dataclass(frozen=True)
class OptimizerConfig:
    """
    Args:
        max_iters: Iteration cap
        step: Initial step of every line search
        backtrack: Step reduction factor in (0, 1)
        armijo: Sufficient-decrease constant in (0, 1)
        grad_tol: Stop when the gradient norm falls below this
        rel_tol: Stop when the relative energy decrease falls below this
        direction: "lbfgs" or "steepest"
        memory: Number of L-BFGS correction pairs
        log_every: Iterations between info log lines
    """
    max_iters: int = 200
    step: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    grad_tol: float = 1e-8
    rel_tol: float = 1e-12
    direction: str = "lbfgs"
    memory: int = 10
    log_every: int = 10

    def __post_init__(self):
        if self.max_iters < 0 or self.step <= 0 or self.grad_tol < 0 or self.rel_tol < 0:
            raise ValueError("optimizer parameters must be positive")
        if not 0 < self.backtrack < 1 or not 0 < self.armijo < 1:
            raise ValueError("backtrack and armijo must lie in (0, 1)")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown descent direction {self.direction!r}")
        if self.memory < 1:
            raise ValueError("memory must be positive")


@dataclass(frozen=True)
class EnergyRecord:
    iteration: int
    total: float
    regularization: float
    data: float
    step: float
    grad_norm: float


@dataclass
class OptimizeResult:
    control: Control
    breakdown: EnergyBreakdown
    history: List[EnergyRecord] = field(default_factory=list)
    converged: bool = False
    warning: bool = False

    @property
    def iterations(self) -> int:
        return self.history[-1].iteration if self.history else 0


def _lbfgs_direction(grad: np.ndarray, pairs: list) -> np.ndarray:
    """Two-loop recursion"""
    q = grad.copy()
    alphas = []
    for s, y in reversed(pairs):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        alphas.append(a)
        q = q - a * y
    if pairs:
        s, y = pairs[-1]
        q = q * (float(s @ y) / float(y @ y))
    for (s, y), a in zip(pairs, reversed(alphas)):
        rho = 1.0 / float(y @ s)
        b = rho * float(y @ q)
        q = q + (a - b) * s
    return -q


def _record(it: int, e: EnergyBreakdown, step: float, grad_norm: float) -> EnergyRecord:
    return EnergyRecord(it, e.total, e.regularization_total, e.data, step, grad_norm)


def _safe_energy(problem: MatchingProblem, x: np.ndarray) -> Optional[EnergyBreakdown]:
    try:
        e = energy(problem, Control.from_flat(problem, x))
    except (FlowBlowUpError, ValueError):
        return None
    return e if np.isfinite(e.total) else None


def _evaluate(problem: MatchingProblem, x: np.ndarray):
    """Energy plus a descent-defining vector g; images use the preconditioned direction as -g"""
    control = Control.from_flat(problem, x)
    if problem.is_image:
        return energy(problem, control), -image_direction(problem, control).flat
    breakdown, grad = value_and_gradient(problem, control)
    return breakdown, grad.flat


def optimize(problem: MatchingProblem, config: Optional[OptimizerConfig] = None,
             initial: Optional[Control] = None) -> OptimizeResult:
    """
    Minimize the matching energy by backtracking line search

    Every accepted step satisfies the Armijo condition, so the energy history never
    increases. Semidirect formulations start from the minimizer of their simultaneous twin and
    then descend on their own energy, so the history and the returned breakdown always measure
    energy(problem, control).

    Args:
        problem: Matching problem
        config: Optimizer settings
        initial: Starting control (zero by default)

    Returns:
        OptimizeResult: best control, its energy, the per-iteration history and flags

    Raises:
        FlowBlowUpError: The energy at the starting control is not finite
    """
    config = config or OptimizerConfig()
    if problem.formulation in (SDP_COARSE_LAST, SDP_COARSE_FIRST):
        initial = _twin_start(problem, config, initial)
    return _descend(problem, config, (initial or Control.zeros(problem)).flat.copy())


def _descend(problem: MatchingProblem, config: OptimizerConfig, x: np.ndarray) -> OptimizeResult:
    current, g = _evaluate(problem, x)
    if not np.isfinite(current.total) or not np.all(np.isfinite(g)):
        raise FlowBlowUpError("non-finite energy at the starting control")
    history = [_record(0, current, 0.0, float(np.linalg.norm(g)))]
    pairs = []
    converged = False
    for it in range(1, config.max_iters + 1):
        grad_norm = float(np.linalg.norm(g))
        if grad_norm <= config.grad_tol:
            converged = True
            break
        d = _lbfgs_direction(g, pairs) if config.direction == "lbfgs" else -g
        slope = float(g @ d)
        if not slope < 0:
            pairs.clear()
            d = -g
            slope = -grad_norm ** 2
        step = config.step
        accepted = None
        while step > 1e-20:
            candidate = _safe_energy(problem, x + step * d)
            if candidate is not None and candidate.total <= current.total + config.armijo * step * slope:
                accepted = candidate
                break
            step *= config.backtrack
        if accepted is None:
            logger.warning(f"✗ Line search failed at iteration {it}; keeping the best control")
            converged = grad_norm <= 10 * config.grad_tol
            break
        x_new = x + step * d
        _, g_new = _evaluate(problem, x_new)
        s, y = x_new - x, g_new - g
        if float(s @ y) > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            pairs.append((s, y))
            if len(pairs) > config.memory:
                pairs.pop(0)
        decrease = current.total - accepted.total
        x, g, current = x_new, g_new, accepted
        history.append(_record(it, current, step, float(np.linalg.norm(g))))
        if it % config.log_every == 0:
            logger.info(f"iter {it}: energy {current.total:.6e} (reg {current.regularization_total:.3e}, "
                        f"data {current.data:.3e}), step {step:.2e}")
        if decrease <= config.rel_tol * max(1.0, abs(current.total)):
            converged = True
            break
    warning = not converged
    if warning:
        logger.warning(f"✗ Optimizer stopped after {history[-1].iteration} iterations without converging")
    else:
        logger.info(f"✓ Optimizer converged after {history[-1].iteration} iterations, energy {current.total:.6e}")
    return OptimizeResult(Control.from_flat(problem, x), current, history, converged, warning)


def _twin_start(problem: MatchingProblem, config: OptimizerConfig, initial: Optional[Control]) -> Control:
    """Minimizer of the simultaneous twin, in the scale order of the semidirect problem"""
    flip = problem.formulation == SDP_COARSE_LAST
    twin = problem.with_formulation(SIMULTANEOUS)
    start = None
    if initial is not None:
        start = Control(initial.momenta[::-1]) if flip else initial
    result = optimize(twin, config, start)
    logger.info(f"Simultaneous twin energy {result.breakdown.total:.6e}; "
                f"continuing on the {problem.formulation} energy")
    return Control(result.control.momenta[::-1]) if flip else result.control
