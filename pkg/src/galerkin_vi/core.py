"""Galerkin discrete Lagrangians, discrete Euler-Lagrange equations and stepping.

An integrator ``PsNrQu`` interpolates each macro step by a degree ``s``
polynomial through ``s + 1`` stage configurations and approximates the action
with an ``r``-point quadrature rule of order ``u``.  All computations use the
full stage formulation; the interior stages are eliminated by solving the
internal stage equations together with the momentum-matching condition.
"""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .basis import BasisTables, ControlPoints, ControlScheme, make_basis_tables, make_control_points
from .models import LagrangianSystem, PhasePoint
from .quadrature import QuadratureKind, QuadratureRule, make_rule
from .solver import NonConvergence, SolveReport, SolverSettings, newton_solve


class SpecError(ValueError):
    """Invalid (s, r, quadrature) combination."""


class WellPosednessWarning(UserWarning):
    pass


@dataclass(frozen=True)
class IntegratorSpec:
    s: int
    rule: QuadratureRule
    points: ControlPoints
    tables: BasisTables
    settings: SolverSettings
    well_posed: bool
    warning: Optional[str] = None

    @property
    def r(self) -> int:
        return self.rule.r

    @property
    def order(self) -> int:
        """Quadrature order ``u``."""
        return self.rule.order

    @property
    def kind(self) -> QuadratureKind:
        return self.rule.kind

    @property
    def expected_order(self) -> int:
        return min(2 * self.s, self.rule.order)

    @property
    def symmetric(self) -> bool:
        return self.points.symmetric

    @property
    def name(self) -> str:
        return f"P{self.s}N{self.r}Q{self.order}{self.kind.tag}"

    def __str__(self):
        return self.name

    def with_settings(self, settings: SolverSettings) -> "IntegratorSpec":
        return IntegratorSpec(self.s, self.rule, self.points, self.tables, settings,
                              self.well_posed, self.warning)


def make_spec(s: int, r: int, kind="gauss", scheme=ControlScheme.EQUISPACED,
              settings: SolverSettings = None, allow_s_gt_r: bool = False,
              points: ControlPoints = None) -> IntegratorSpec:
    """Assemble the ``PsNrQu`` integrator for degree ``s`` and ``r`` nodes."""
    if s < 1:
        raise SpecError(f"polynomial degree must be >= 1, got s={s}")
    if s > r and not allow_s_gt_r:
        raise SpecError(f"s={s} > r={r}: polynomial degree must not exceed the node count")
    try:
        rule = make_rule(kind, r)
        points = points if points is not None else make_control_points(s, scheme)
    except ValueError as exc:
        raise SpecError(str(exc)) from exc
    if points.s != s:
        raise SpecError(f"control points have degree {points.s}, expected {s}")
    well_posed = rule.order >= 2 * s - 1
    warning = None
    if not well_posed:
        warning = (f"quadrature order {rule.order} < 2s-1 = {2 * s - 1}: unique solvability "
                   "of the stage equations is not guaranteed")
        warnings.warn(warning, WellPosednessWarning, stacklevel=2)
    return IntegratorSpec(s, rule, points, make_basis_tables(points, rule),
                          settings or SolverSettings(), well_posed, warning)


_SHORT = re.compile(r"^s(\d+)r(\d+)(gauss|gau|lobatto|lob)$", re.I)
_PAPER = re.compile(r"^P(\d+)N(\d+)(?:Q(\d+))?(Gau|Lob)$", re.I)


def parse_spec(text: str):
    """Parse ``s3r4lobatto`` or ``P3N4Q6Lob`` into ``(s, r, kind)``."""
    text = text.strip()
    m = _SHORT.match(text)
    if m:
        s, r, kind = m.groups()
    else:
        m = _PAPER.match(text)
        if not m:
            raise SpecError(f"cannot parse integrator spec {text!r}")
        s, r, u, kind = m.groups()
        expected = 2 * int(r) if kind.lower().startswith("gau") else 2 * int(r) - 2
        if u is not None and int(u) != expected:
            raise SpecError(f"{text}: quadrature order must be {expected}")
    kind = QuadratureKind.GAUSS if kind.lower().startswith("gau") else QuadratureKind.LOBATTO
    return int(s), int(r), kind


@dataclass
class Segment:
    """Stage configurations ``(q_k^0, ..., q_k^s)`` of macro step ``k``."""

    k: int
    stages: np.ndarray
    h: float
    report: Optional[SolveReport] = None

    @property
    def start(self) -> np.ndarray:
        return self.stages[0]

    @property
    def end(self) -> np.ndarray:
        return self.stages[-1]


def _node_states(spec: IntegratorSpec, stages, h):
    X = np.asarray(stages, dtype=float)
    # work with displacements from q^0 to avoid cancellation in the velocities
    dX = X - X[0]
    return X[0] + spec.tables.L @ dX, spec.tables.Ldot @ dX / h


def _gradients(system, Q, V):
    gq = np.array([system.grad_q(q, v) for q, v in zip(Q, V)])
    gv = np.array([system.grad_qdot(q, v) for q, v in zip(Q, V)])
    return gq, gv


def _stage_gradient(spec, system, stages, h) -> np.ndarray:
    Q, V = _node_states(spec, stages, h)
    gq, gv = _gradients(system, Q, V)
    b = spec.rule.weights[:, None]
    return h * spec.tables.L.T @ (b * gq) + spec.tables.Ldot.T @ (b * gv)


def discrete_lagrangian(spec: IntegratorSpec, system: LagrangianSystem, segment: Segment) -> float:
    """``h * sum_i b_i L(q_d(c_i h), qdot_d(c_i h))``."""
    Q, V = _node_states(spec, segment.stages, segment.h)
    values = np.array([system.lagrangian(q, v) for q, v in zip(Q, V)])
    return float(segment.h * np.dot(spec.rule.weights, values))


def del_gradient(spec: IntegratorSpec, system: LagrangianSystem, segment: Segment) -> np.ndarray:
    """Derivatives of the discrete Lagrangian w.r.t. every stage, shape ``(s+1, n)``."""
    return _stage_gradient(spec, system, segment.stages, segment.h)


def interior_residuals(spec: IntegratorSpec, system: LagrangianSystem, segment: Segment) -> np.ndarray:
    """Internal stage equations ``D_i L_d = 0`` for ``i = 2..s``; shape ``(s-1, n)``."""
    return del_gradient(spec, system, segment)[1:-1]


def _check_interior(spec, system, segment, G):
    if spec.s > 1:
        res = float(np.max(np.abs(G[1:-1])))
        if res > 10 * spec.settings.residual_tol:
            warnings.warn(f"interior stage residual {res:.3e} exceeds the solver tolerance; "
                          "momentum is not a discrete Legendre transform", RuntimeWarning,
                          stacklevel=3)


def legendre_minus(spec: IntegratorSpec, system: LagrangianSystem, segment: Segment) -> PhasePoint:
    """``(q_k^0, -D_1 L_d)``: momentum at the left end of the segment."""
    G = del_gradient(spec, system, segment)
    _check_interior(spec, system, segment, G)
    return PhasePoint(segment.start.copy(), -G[0])


def legendre_plus(spec: IntegratorSpec, system: LagrangianSystem, segment: Segment) -> PhasePoint:
    """``(q_k^s, D_{s+1} L_d)``: momentum at the right end of the segment."""
    G = del_gradient(spec, system, segment)
    _check_interior(spec, system, segment, G)
    return PhasePoint(segment.end.copy(), G[-1])


def solve_segment(spec: IntegratorSpec, system: LagrangianSystem, start: PhasePoint, h: float,
                  guess=None, k: int = 0) -> Segment:
    """Find stages ``1..s`` with ``-D_1 L_d = p`` and ``D_i L_d = 0`` (``i = 2..s``).

    ``guess`` holds initial values for stages ``1..s``, shape ``(s, n)``.
    """
    if h == 0:
        raise ValueError("step size must be nonzero")
    q0, p0 = start.q, start.p
    n, s = q0.size, spec.s
    if guess is None:
        guess = np.tile(q0, (s, 1))
    b = spec.rule.weights[:, None]
    L, Ldot = spec.tables.L, spec.tables.Ldot

    # unknowns are the stage displacements q^nu - q^0, nu = 1..s
    def residual(x):
        dX = np.vstack([np.zeros(n), x.reshape(s, n)])
        gq, gv = _gradients(system, q0 + L @ dX, Ldot @ dX / h)
        G = h * L.T[:-1] @ (b * gq) + Ldot.T[:-1] @ (b * gv)
        G[0] += p0
        return G.ravel()

    x0 = (np.asarray(guess, dtype=float) - q0).ravel()
    x, report = newton_solve(residual, x0, spec.settings)
    return Segment(k, np.vstack([q0, q0 + x.reshape(s, n)]), h, report)


def initial_step(spec: IntegratorSpec, system: LagrangianSystem, start: PhasePoint, h: float) -> Segment:
    """First segment from initial data, all stages guessed equal to ``q(0)``."""
    return solve_segment(spec, system, start, h, k=0)


def extrapolate_guess(previous: Segment) -> np.ndarray:
    """Previous stages shifted so the segment starts at its old endpoint."""
    X = previous.stages
    return X[1:] - X[0] + X[-1]


def step(spec: IntegratorSpec, system: LagrangianSystem, previous: Segment) -> Segment:
    """Advance one segment: the discrete Lagrangian map."""
    start = legendre_plus(spec, system, previous)
    return solve_segment(spec, system, start, previous.h, extrapolate_guess(previous),
                         k=previous.k + 1)


def hamiltonian_step(spec: IntegratorSpec, system: LagrangianSystem, point: PhasePoint,
                     h: float) -> PhasePoint:
    """One step of the discrete Hamiltonian map ``(q_k, p_k) -> (q_{k+1}, p_{k+1})``."""
    return legendre_plus(spec, system, solve_segment(spec, system, point, h))


@dataclass
class Trajectory:
    spec: IntegratorSpec
    system: LagrangianSystem
    h: float
    segments: list = field(default_factory=list)
    phase_points: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.segments)

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(len(self.phase_points))

    @property
    def q(self) -> np.ndarray:
        return np.array([pt.q for pt in self.phase_points])

    @property
    def p(self) -> np.ndarray:
        return np.array([pt.p for pt in self.phase_points])

    @property
    def iterations(self) -> list:
        return [seg.report.iterations for seg in self.segments]

    @property
    def final(self) -> PhasePoint:
        return self.phase_points[-1]


class IntegrationFailure(NonConvergence):
    """Raised by :func:`integrate`; carries the partial trajectory."""

    def __init__(self, step_index: int, trajectory: Trajectory, cause: NonConvergence):
        RuntimeError.__init__(self, f"step {step_index} failed: {cause}")
        self.step_index = step_index
        self.trajectory = trajectory
        self.report = cause.report


def integrate(spec: IntegratorSpec, system: LagrangianSystem, start: PhasePoint, h: float,
              steps: int) -> Trajectory:
    """Run ``steps`` macro steps of size ``h`` from ``start``."""
    if steps < 1:
        raise ValueError(f"number of steps must be >= 1, got {steps}")
    traj = Trajectory(spec, system, h, [], [start])
    point, guess = start, None
    for k in range(steps):
        try:
            seg = solve_segment(spec, system, point, h, guess, k=k)
        except NonConvergence as exc:
            raise IntegrationFailure(k, traj, exc) from exc
        point = legendre_plus(spec, system, seg)
        traj.segments.append(seg)
        traj.phase_points.append(point)
        guess = extrapolate_guess(seg)
    return traj
