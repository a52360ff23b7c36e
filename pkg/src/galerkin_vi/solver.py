"""Damped Newton iteration for the stage equations."""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

_SQRT_EPS = np.sqrt(np.finfo(float).eps)


class JacobianMode(str, Enum):
    FORWARD = "forward"
    CENTRAL = "central"


@dataclass(frozen=True)
class SolverSettings:
    residual_tol: float = 1e-12
    max_iterations: int = 50
    jacobian_mode: JacobianMode = JacobianMode.CENTRAL
    damping: float = 0.5
    max_halvings: int = 8

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        object.__setattr__(self, "jacobian_mode", JacobianMode(self.jacobian_mode))

    def with_tol(self, tol: float) -> "SolverSettings":
        return replace(self, residual_tol=tol)


@dataclass(frozen=True)
class SolveReport:
    converged: bool
    iterations: int
    final_residual: float
    jacobian_condition_estimate: float


class NonConvergence(RuntimeError):
    def __init__(self, message: str, report: SolveReport):
        super().__init__(f"{message} (iterations={report.iterations}, "
                         f"residual={report.final_residual:.3e}, "
                         f"cond={report.jacobian_condition_estimate:.3e})")
        self.report = report


def fd_jacobian(residual, x, f0=None, mode=JacobianMode.CENTRAL) -> np.ndarray:
    """Finite-difference Jacobian with steps ``sqrt(eps) * (1 + |x_j|)``."""
    x = np.asarray(x, dtype=float)
    if f0 is None:
        f0 = residual(x)
    J = np.empty((f0.size, x.size))
    for j in range(x.size):
        step = _SQRT_EPS * (1.0 + abs(x[j]))
        xp = x.copy()
        xp[j] += step
        if mode is JacobianMode.CENTRAL:
            xm = x.copy()
            xm[j] -= step
            J[:, j] = (residual(xp) - residual(xm)) / (xp[j] - xm[j])
        else:
            J[:, j] = (residual(xp) - f0) / (xp[j] - x[j])
    return J


def _norm(v) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def newton_solve(residual: Callable[[np.ndarray], np.ndarray], x0, settings: SolverSettings = None,
                 jacobian: Optional[Callable] = None, check: bool = True):
    """Solve ``residual(x) = 0`` starting from ``x0``.

    Convergence is declared when the max-norm of the residual drops to
    ``settings.residual_tol``.  A step that does not reduce the residual is
    halved up to ``settings.max_halvings`` times.  Returns ``(x, report)``;
    with ``check=True`` a failed solve raises :class:`NonConvergence`.
    """
    settings = settings or SolverSettings()
    x = np.array(x0, dtype=float)
    f = np.asarray(residual(x), dtype=float)
    fnorm = _norm(f)
    cond = 1.0
    it = 0
    while fnorm > settings.residual_tol and it < settings.max_iterations:
        it += 1
        J = jacobian(x) if jacobian is not None else fd_jacobian(
            residual, x, f, settings.jacobian_mode)
        cond = float(np.linalg.cond(J))
        try:
            dx = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        for _ in range(settings.max_halvings + 1):
            x_new = x + lam * dx
            f_new = np.asarray(residual(x_new), dtype=float)
            if _norm(f_new) < fnorm:
                break
            lam *= settings.damping
        else:
            break
        x, f, fnorm = x_new, f_new, _norm(f_new)

    report = SolveReport(fnorm <= settings.residual_tol, it, fnorm, cond)
    if check and not report.converged:
        raise NonConvergence("Newton iteration did not converge", report)
    return x, report
