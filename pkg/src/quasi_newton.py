"""
BFGS minimization with a backtracking (Armijo) line search.

The inverse Hessian approximation starts as a scaled identity, is rescaled by
s'y / y'y at the first update, and skips updates whose curvature s'y is not positive.
A failed line search resets the approximation once; a second failure in a row stops
the run as stalled. Every accepted step strictly decreases the objective.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np
import numpy.typing as npt

from src.base_panel_model import NonFiniteLikelihoodError
from src.config_parameters import OptimizerConfig
from src.enums.panel_enums import OptimizerStatus

logger = logging.getLogger(__name__)

Objective = Callable[[npt.NDArray[np.float64]], float]
Gradient = Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]]

ARMIJO_CONSTANT = 1e-4
BACKTRACK_FACTOR = 0.5
MAX_BACKTRACKS = 60


@dataclass
class OptimizationResult:
    """
    Outcome of a minimization run.

    Attributes:
        x (np.ndarray): Final point.
        fun (float): Objective at x.
        grad (np.ndarray): Gradient at x.
        iterations (int): Accepted steps.
        status (OptimizerStatus): Why the run stopped.
        converged (bool): Whether the stopping reason counts as convergence.
        trace (List[float]): Objective after each accepted step, starting point first.
    """

    x: npt.NDArray[np.float64]
    fun: float
    grad: npt.NDArray[np.float64]
    iterations: int
    status: OptimizerStatus
    converged: bool
    trace: List[float] = field(default_factory=list)


class QuasiNewtonOptimizer:
    """
    BFGS optimizer stopping on small objective change, small gradient or the iteration cap.
    """

    def __init__(self, config: OptimizerConfig) -> None:
        """
        Initialize the optimizer.

        Args:
            config (OptimizerConfig): Tolerances and iteration cap.
        """
        config.validate()
        self.config = config

    @staticmethod
    def _initial_inverse(grad: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        scale = 1.0 / max(1.0, float(np.max(np.abs(grad))) if grad.size else 1.0)
        return scale * np.eye(grad.size)

    @staticmethod
    def _backtrack(
        fun: Objective, x: npt.NDArray[np.float64], f: float, direction: npt.NDArray[np.float64], slope: float
    ) -> tuple[float, float] | None:
        step = 1.0
        for _ in range(MAX_BACKTRACKS):
            with np.errstate(all="ignore"):
                f_new = fun(x + step * direction)
            if np.isfinite(f_new) and f_new <= f + ARMIJO_CONSTANT * step * slope and f_new < f:
                return step, f_new
            step *= BACKTRACK_FACTOR
        return None

    def _objective_converged(self, previous: float, current: float) -> bool:
        change = abs(previous - current)
        return (
            change <= self.config.absolute_tolerance
            and change <= self.config.relative_tolerance * max(abs(current), np.finfo(float).tiny)
        )

    def minimize(self, fun: Objective, grad: Gradient, x0: npt.NDArray[np.float64]) -> OptimizationResult:
        """
        Minimize `fun` from `x0`.

        Args:
            fun (Objective): Objective function.
            grad (Gradient): Its gradient.
            x0 (np.ndarray): Starting point.

        Returns:
            OptimizationResult: Final point and diagnostics; non-convergence is a status.

        Raises:
            NonFiniteLikelihoodError: If the objective is not finite at x0.
        """
        x = np.asarray(x0, dtype=float).copy()
        f = fun(x)
        if not np.isfinite(f):
            raise NonFiniteLikelihoodError(f"Objective is not finite at the starting point: {f}")
        g = grad(x)

        inverse = self._initial_inverse(g)
        fresh = True
        first_update = True
        trace = [f]
        iterations = 0
        status = OptimizerStatus.MAX_ITERATIONS

        while iterations < self.config.max_iterations:
            if g.size == 0 or np.max(np.abs(g)) <= self.config.gradient_tolerance:
                status = OptimizerStatus.GRADIENT_TOLERANCE
                break

            direction = -inverse @ g
            slope = float(g @ direction)
            if slope >= 0:
                inverse = self._initial_inverse(g)
                fresh = True
                direction = -inverse @ g
                slope = float(g @ direction)

            accepted = self._backtrack(fun, x, f, direction, slope)
            if accepted is None:
                if fresh:
                    status = OptimizerStatus.STALLED
                    break
                inverse = self._initial_inverse(g)
                fresh = True
                continue

            step, f_new = accepted
            x_new = x + step * direction
            g_new = grad(x_new)
            s = x_new - x
            y = g_new - g
            previous = f
            x, f, g = x_new, f_new, g_new
            iterations += 1
            trace.append(f)
            logger.debug("iteration %d: objective %.10g, step %.3g", iterations, f, step)

            if self._objective_converged(previous, f):
                status = OptimizerStatus.OBJECTIVE_TOLERANCE
                break

            curvature = float(s @ y)
            if curvature > 1e-10 * float(np.linalg.norm(s) * np.linalg.norm(y)):
                if first_update:
                    inverse = (curvature / float(y @ y)) * np.eye(x.size)
                    first_update = False
                rho = 1.0 / curvature
                hy = inverse @ y
                inverse = (
                    inverse
                    - rho * (np.outer(hy, s) + np.outer(s, hy))
                    + (rho * rho * float(y @ hy) + rho) * np.outer(s, s)
                )
                fresh = False

        stalled_near_optimum = status == OptimizerStatus.STALLED and (
            float(np.max(np.abs(g))) <= self.config.stall_gradient_tolerance
        )
        converged = stalled_near_optimum or status in (
            OptimizerStatus.OBJECTIVE_TOLERANCE,
            OptimizerStatus.GRADIENT_TOLERANCE,
        )
        if status == OptimizerStatus.STALLED:
            logger.debug("Line search stalled after %d iterations", iterations)
        return OptimizationResult(x, float(f), g, iterations, status, bool(converged), trace)
