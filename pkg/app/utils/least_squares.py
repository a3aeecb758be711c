"""Bounded nonlinear least squares shared by the weekly and pulse fits.

Both solvers take a callable returning `(residual, jacobian)` at a parameter
vector, where `residual = model - data`. Steps are projected onto the box
`[lower, upper]` and only accepted when the sum of squares strictly drops,
so `history` is monotone non-increasing.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy import linalg

from app.daily.schemas import FitConfig

logger = logging.getLogger(__name__)

ResidualFn = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]

MAX_DAMPING = 1e12
MIN_DAMPING = 1e-12
MAX_HALVINGS = 40


@dataclass(frozen=True)
class SolverResult:
    x: np.ndarray
    objective: float
    converged: bool
    iterations: int
    history: Tuple[float, ...]


def minimize_squares(
    fn: ResidualFn,
    x0: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    config: FitConfig,
) -> SolverResult:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)

    if config.method == "gradient_descent":
        return _gradient_descent(fn, x, lower, upper, config)
    return _levenberg_marquardt(fn, x, lower, upper, config)


def _objective(r: np.ndarray) -> float:
    return float(r @ r)


def _column_scale(jacobian: np.ndarray) -> np.ndarray:
    diag = np.einsum("ij,ij->j", jacobian, jacobian)
    floor = 1e-12 * max(float(diag.max(initial=0.0)), 1.0)
    return np.maximum(diag, floor)


def _levenberg_marquardt(fn, x, lower, upper, config: FitConfig) -> SolverResult:
    r, jac = fn(x)
    obj = _objective(r)
    history = [obj]
    floor = 1e-28 * max(obj, 1.0)
    lam = config.damping
    converged = False
    iterations = 0
    n_params = x.size

    while iterations < config.max_iterations:
        iterations += 1
        if obj <= floor:
            converged = True
            break

        scale = np.sqrt(lam * _column_scale(jac))
        lhs = np.vstack([jac, np.diag(scale)])
        rhs = np.concatenate([-r, np.zeros(n_params)])
        step = linalg.lstsq(lhs, rhs)[0]
        candidate = np.clip(x + step, lower, upper)

        r_new, jac_new = fn(candidate)
        obj_new = _objective(r_new)

        if np.isfinite(obj_new) and obj_new < obj:
            improvement = (obj - obj_new) / obj
            undamped = lam <= config.damping
            x, r, jac, obj = candidate, r_new, jac_new, obj_new
            history.append(obj)
            lam = max(lam / 3.0, MIN_DAMPING)
            if improvement < config.convergence_tol and undamped:
                converged = True
                break
        else:
            lam *= 4.0
            if lam > MAX_DAMPING:
                # no descent direction left inside the box
                converged = True
                break

    if not converged:
        logger.warning(f"solver_unconverged method=levenberg_marquardt iterations={iterations} objective={obj}")

    return SolverResult(x=x, objective=obj, converged=converged, iterations=iterations, history=tuple(history))


def _gradient_descent(fn, x, lower, upper, config: FitConfig) -> SolverResult:
    r, jac = fn(x)
    obj = _objective(r)
    history = [obj]
    floor = 1e-28 * max(obj, 1.0)
    converged = False
    iterations = 0

    while iterations < config.max_iterations:
        iterations += 1
        if obj <= floor:
            converged = True
            break

        direction = -(jac.T @ r) / _column_scale(jac)
        rate = config.learning_rate
        accepted = False
        for _ in range(MAX_HALVINGS):
            candidate = np.clip(x + rate * direction, lower, upper)
            r_new, jac_new = fn(candidate)
            obj_new = _objective(r_new)
            if np.isfinite(obj_new) and obj_new < obj:
                accepted = True
                break
            rate *= 0.5

        if not accepted:
            converged = True
            break

        improvement = (obj - obj_new) / obj
        x, r, jac, obj = candidate, r_new, jac_new, obj_new
        history.append(obj)
        if improvement < config.convergence_tol:
            converged = True
            break

    if not converged:
        logger.warning(f"solver_unconverged method=gradient_descent iterations={iterations} objective={obj}")

    return SolverResult(x=x, objective=obj, converged=converged, iterations=iterations, history=tuple(history))
