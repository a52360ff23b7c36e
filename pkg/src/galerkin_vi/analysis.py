"""Diagnostics: convergence orders, invariants, reversibility and linear stability."""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (IntegrationFailure, IntegratorSpec, Trajectory, hamiltonian_step, integrate)
from .models import LagrangianSystem, PhasePoint, angular_momentum

NOISE_FLOOR = 1e-10
PAPER_STEP_SIZES = (1.0, 0.5, 0.25, 0.125, 0.1, 0.0625, 0.03125)


# -- errors and order fits ---------------------------------------------------

def global_error(trajectory: Trajectory, exact: Callable[[float, PhasePoint], PhasePoint]):
    """Max-norm error of ``q`` and ``p`` over all steps against ``exact(t, start)``."""
    start = trajectory.phase_points[0]
    ref = [exact(t, start) for t in trajectory.times]
    eq = np.max(np.abs(trajectory.q - np.array([pt.q for pt in ref])))
    ep = np.max(np.abs(trajectory.p - np.array([pt.p for pt in ref])))
    return float(eq), float(ep)


def return_error(trajectory: Trajectory, start: PhasePoint):
    """Distance between the final phase point and ``start`` (periodic orbits)."""
    final = trajectory.final
    return float(np.max(np.abs(final.q - start.q))), float(np.max(np.abs(final.p - start.p)))


@dataclass(frozen=True)
class OrderFit:
    order: float
    points_used: int
    reliable: bool
    mask: tuple

    def __float__(self):
        return float(self.order)


def _slope(h, e):
    x, y = np.log(h), np.log(e)
    return float(np.polyfit(x, y, 1)[0])


def fit_order(step_sizes, errors, floor: float = NOISE_FLOOR, ceiling: Optional[float] = None,
              trim_saturated: bool = False) -> OrderFit:
    """Least-squares slope of ``log(error)`` against ``log(h)``.

    Points at or below ``floor`` (solver/rounding noise) and, if given, above
    ``ceiling`` (pre-asymptotic) are discarded.  With ``trim_saturated`` the
    smallest-step points are dropped while their local slope is less than half
    of the slope fitted through the remaining points, which removes values
    that have run into the noise floor.  A fit is reliable when it uses at
    least three points and shows actual convergence (slope above 1/2); fewer
    than two usable points give ``nan``.
    """
    h = np.asarray(step_sizes, dtype=float)
    e = np.asarray([np.nan if v is None else v for v in errors], dtype=float)
    mask = np.isfinite(e) & (e > floor)
    if ceiling is not None:
        mask &= e <= ceiling
    idx = [i for i in np.argsort(-h) if mask[i]]
    if trim_saturated:
        while len(idx) >= 4:
            rest = _slope(h[idx[:-1]], e[idx[:-1]])
            local = _slope(h[idx[-2:]], e[idx[-2:]])
            if local >= 0.5 * rest:
                break
            mask[idx.pop()] = False
    if len(idx) < 2:
        return OrderFit(float("nan"), len(idx), False, tuple(bool(m) for m in mask))
    order = _slope(h[idx], e[idx])
    return OrderFit(order, len(idx), len(idx) >= 3 and order > 0.5, tuple(bool(m) for m in mask))


@dataclass
class ConvergenceReport:
    spec: str
    expected_order: int
    step_sizes: list
    errors_q: list
    errors_p: list
    fit_q: OrderFit
    fit_p: OrderFit
    failed: list = field(default_factory=list)

    @property
    def fitted_order_q(self) -> float:
        return self.fit_q.order

    @property
    def fitted_order_p(self) -> float:
        return self.fit_p.order

    @property
    def points_used(self) -> int:
        return min(self.fit_q.points_used, self.fit_p.points_used)

    @property
    def reliable(self) -> bool:
        return self.fit_q.reliable and self.fit_p.reliable

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "expected_order": self.expected_order,
            "step_sizes": list(self.step_sizes),
            "errors_q": list(self.errors_q),
            "errors_p": list(self.errors_p),
            "fitted_order_q": _finite_or_none(self.fitted_order_q),
            "fitted_order_p": _finite_or_none(self.fitted_order_p),
            "points_used": self.points_used,
            "reliable": self.reliable,
            "failed_step_sizes": list(self.failed),
        }


def _finite_or_none(x):
    return float(x) if np.isfinite(x) else None


def steps_for(horizon: float, h: float) -> int:
    n = int(round(horizon / h))
    if n < 1 or abs(n * h - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not a multiple of h={h}")
    return n


def convergence_sweep(spec: IntegratorSpec, system: LagrangianSystem, start: PhasePoint,
                      step_sizes: Sequence[float] = PAPER_STEP_SIZES, horizon: float = 10.0,
                      mode: str = "exact", floor: float = NOISE_FLOOR,
                      ceiling: Optional[float] = None, trim_saturated: bool = False,
                      refine: int = 0) -> ConvergenceReport:
    """Errors for each step size and the fitted convergence orders.

    ``mode="exact"`` measures the global error against ``system.exact``;
    ``mode="return"`` measures the distance to ``start`` after ``horizon``
    (a whole number of periods).  Failed step sizes are recorded and skipped.
    ``refine`` allows up to that many extra halvings of the smallest step
    while fewer than three errors lie between ``floor`` and ``ceiling``.
    """
    if mode == "exact" and system.exact is None:
        raise ValueError(f"system {system.name!r} has no exact solution; use mode='return'")
    hs, eq, ep, failed = [], [], [], []

    def run(h):
        try:
            traj = integrate(spec, system, start, h, steps_for(horizon, h))
        except IntegrationFailure:
            failed.append(h)
            hs.append(h), eq.append(None), ep.append(None)
            return
        err = global_error(traj, system.exact) if mode == "exact" else return_error(traj, start)
        hs.append(h), eq.append(err[0]), ep.append(err[1])

    for h in step_sizes:
        run(h)

    def usable():
        return sum(1 for v in eq if v is not None and v > floor and (ceiling is None or v <= ceiling))

    h = min(step_sizes)
    for _ in range(refine):
        last = eq[-1]
        if usable() >= 3 or (last is not None and last <= floor):
            break
        h /= 2
        run(h)

    fq = fit_order(hs, eq, floor, ceiling, trim_saturated)
    fp = fit_order(hs, ep, floor, ceiling, trim_saturated)
    return ConvergenceReport(spec.name, spec.expected_order, hs, eq, ep, fq, fp, failed)


# -- conserved quantities ----------------------------------------------------

class Quantity(str, Enum):
    ENERGY = "energy"
    ANGULAR_MOMENTUM = "angular_momentum"


def _points(trajectory_or_points):
    if isinstance(trajectory_or_points, Trajectory):
        return trajectory_or_points.phase_points
    return list(trajectory_or_points)


def conservation_series(trajectory, quantity, system: LagrangianSystem = None) -> np.ndarray:
    """``|Q(q_k, p_k) - Q(q_0, p_0)|`` along a trajectory or a list of phase points."""
    quantity = Quantity(quantity)
    points = _points(trajectory)
    if quantity is Quantity.ANGULAR_MOMENTUM:
        if points[0].dim != 2:
            raise ValueError("angular momentum is only defined for planar systems")
        values = np.array([angular_momentum(pt) for pt in points])
    else:
        system = system or getattr(trajectory, "system", None)
        if system is None:
            raise ValueError("energy series needs the system")
        values = np.array([system.energy(pt.q, pt.p) for pt in points])
    return np.abs(values - values[0])


def drift_ratio(series) -> float:
    """Max deviation over the second half divided by the max over the first half."""
    series = np.asarray(series)
    half = len(series) // 2
    first = np.max(series[1:half + 1]) if half else 0.0
    return float(np.max(series[half:]) / first) if first > 0 else float("inf")


# -- reversibility and symplecticity -----------------------------------------

def reversibility_defect(spec: IntegratorSpec, system: LagrangianSystem, point: PhasePoint,
                         h: float) -> float:
    """Max-norm of ``Phi_{-h}(Phi_h(point)) - point``."""
    forward = hamiltonian_step(spec, system, point, h)
    back = hamiltonian_step(spec, system, forward, -h)
    return float(max(np.max(np.abs(back.q - point.q)), np.max(np.abs(back.p - point.p))))


def canonical_matrix(n: int) -> np.ndarray:
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


def step_jacobian(spec, system, point: PhasePoint, h: float, eps: float = 1e-4) -> np.ndarray:
    """Central-difference Jacobian of one discrete Hamiltonian step in phase space.

    The default ``eps`` balances truncation against the Newton tolerance.
    """
    z = point.as_vector()
    cols = []
    for j in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[j] += eps
        zm[j] -= eps
        fp = hamiltonian_step(spec, system, PhasePoint.from_vector(zp), h).as_vector()
        fm = hamiltonian_step(spec, system, PhasePoint.from_vector(zm), h).as_vector()
        cols.append((fp - fm) / (2 * eps))
    return np.column_stack(cols)


def symplecticity_defect(spec, system, point: PhasePoint, h: float, eps: float = 1e-4) -> float:
    """Max-norm of ``A^T J A - J`` for the step Jacobian ``A``."""
    A = step_jacobian(spec, system, point, h, eps)
    J = canonical_matrix(point.dim)
    return float(np.max(np.abs(A.T @ J @ A - J)))


# -- linear stability --------------------------------------------------------

def _stage_stiffness(spec: IntegratorSpec, h: float, omega: float) -> np.ndarray:
    """Matrix ``K`` with ``grad L_d = K X`` for the scalar oscillator."""
    L, Ldot, b = spec.tables.L, spec.tables.Ldot, spec.rule.weights
    return -h * omega ** 2 * L.T @ (b[:, None] * L) + Ldot.T @ (b[:, None] * Ldot) / h


def linear_step_matrix(spec: IntegratorSpec, h: float, omega: float = 1.0) -> np.ndarray:
    """Exact one-step map ``(q, p) -> (q', p')`` for ``L = qdot^2/2 - omega^2 q^2/2``."""
    K = _stage_stiffness(spec, h, omega)
    s = spec.s
    A = K[:s, 1:]
    # columns: response to (q0, p0) = (1, 0) and (0, 1)
    rhs = np.zeros((s, 2))
    rhs[:, 0] = -K[:s, 0]
    rhs[0, 1] = -1.0
    try:
        X = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"{spec.name}: singular stage system at h*omega={h * omega}") from exc
    stages = np.vstack([[1.0, 0.0], X])
    q_new = stages[-1]
    p_new = K[s] @ stages
    return np.vstack([q_new, p_new])


def stability_matrix(spec: IntegratorSpec, h_omega: float) -> np.ndarray:
    """Iteration matrix acting on ``(p, omega q)``."""
    if h_omega <= 0:
        raise ValueError("h*omega must be positive")
    Mqp = linear_step_matrix(spec, h_omega, 1.0)
    # reorder (q, p) -> (p, q); with omega = 1 the scaling is trivial
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    return P @ Mqp @ P


def max_modulus(M: np.ndarray) -> float:
    """Largest eigenvalue modulus of a real 2x2 matrix via its characteristic polynomial."""
    t = M[0, 0] + M[1, 1]
    d = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    disc = complex(t * t / 4.0 - d) ** 0.5
    return float(max(abs(t / 2.0 + disc), abs(t / 2.0 - disc)))


@dataclass
class StabilityGrid:
    spec: str
    h_omega: list
    max_modulus: list
    boundary: Optional[float] = None
    stable_intervals: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"spec": self.spec, "boundary": self.boundary,
                "stable_intervals": [list(iv) for iv in self.stable_intervals],
                "points": len(self.h_omega)}


_UNIT = 1.0 + 1e-12


def _unstable(spec, x) -> bool:
    return max_modulus(stability_matrix(spec, x)) > _UNIT


def _bisect(spec, lo, hi, tol):
    # lo stable, hi unstable
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _unstable(spec, mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def stability_scan(spec: IntegratorSpec, grid, tol: float = 1e-8) -> StabilityGrid:
    """Max eigenvalue modulus on ``grid`` and the first loss of stability."""
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be positive and strictly increasing")
    moduli = [max_modulus(stability_matrix(spec, x)) for x in grid]
    unstable = [m > _UNIT for m in moduli]
    boundary = None
    if unstable[0]:
        boundary = _bisect(spec, 0.0, grid[0], tol) if not _unstable(spec, grid[0] * 1e-6) else 0.0
    else:
        for i in range(1, len(grid)):
            if unstable[i]:
                boundary = _bisect(spec, grid[i - 1], grid[i], tol)
                break
    intervals = []
    lo = None
    for i, (x, bad) in enumerate(zip(grid, unstable)):
        if not bad and lo is None:
            lo = x if i == 0 else _bisect_up(spec, grid[i - 1], x, tol)
        elif bad and lo is not None:
            intervals.append((float(lo), float(_bisect(spec, grid[i - 1], x, tol))))
            lo = None
    if lo is not None:
        intervals.append((float(lo), float(grid[-1])))
    return StabilityGrid(spec.name, grid.tolist(), moduli, boundary, intervals)


def _bisect_up(spec, lo, hi, tol):
    # lo unstable, hi stable
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _unstable(spec, mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- run time ----------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkRow:
    spec: str
    order: int
    h: float
    wall_time: float
    err_q: float
    err_p: float


def benchmark(specs, system: LagrangianSystem, start: PhasePoint, step_sizes, horizon: float,
              repeats: int = 5) -> list:
    """Median wall time of ``integrate`` and the resulting global errors.

    Repetitions are interleaved across specs so that background load affects
    every spec alike.  Rows come out ordered by spec, then step size.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("benchmark needs at least one integrator spec")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    times = {}
    errors = {}
    for h in step_sizes:
        n = steps_for(horizon, h)
        for _ in range(repeats):
            for i, spec in enumerate(specs):
                t0 = time.perf_counter()
                traj = integrate(spec, system, start, h, n)
                times.setdefault((i, h), []).append(time.perf_counter() - t0)
                errors[(i, h)] = global_error(traj, system.exact)
    return [BenchmarkRow(spec.name, spec.expected_order, h, statistics.median(times[(i, h)]),
                         *errors[(i, h)])
            for i, spec in enumerate(specs) for h in step_sizes]


def pareto_front(rows) -> list:
    """Rows not dominated in (wall time, max error)."""
    front = []
    for a in rows:
        ea = max(a.err_q, a.err_p)
        dominated = any(
            b is not a and b.wall_time <= a.wall_time and max(b.err_q, b.err_p) <= ea
            and (b.wall_time < a.wall_time or max(b.err_q, b.err_p) < ea)
            for b in rows)
        if not dominated:
            front.append(a)
    return front
