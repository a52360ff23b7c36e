"""Lagrangian test systems: harmonic oscillator, Kepler problem, user-defined."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

_SQRT_EPS = np.sqrt(np.finfo(float).eps)

# Kepler setup giving an ellipse of period 5 through q0 = (5, 0), p0 = (0, 17)
KEPLER_K = 1.016895192894334e3
KEPLER_Q0 = (5.0, 0.0)
KEPLER_P0 = (0.0, 17.0)
KEPLER_PERIOD = 5.0


class SingularityError(ArithmeticError):
    """Model evaluated at a singular configuration."""


@dataclass(frozen=True)
class PhasePoint:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if q.shape != p.shape or q.ndim != 1:
            raise ValueError(f"q and p must be vectors of equal length, got {q.shape}, {p.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("phase point has non-finite entries")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def dim(self) -> int:
        return self.q.size

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_vector(cls, z) -> "PhasePoint":
        z = np.asarray(z, dtype=float)
        n = z.size // 2
        return cls(z[:n], z[n:])


@dataclass(frozen=True)
class LagrangianSystem:
    """A Lagrangian ``L(q, qdot)`` with its partial gradients.

    ``hamiltonian_rhs(q, p)`` returns ``(dq/dt, dp/dt)`` and is only needed by
    the explicit Runge-Kutta comparator.  ``exact(t, start)`` is optional.
    """

    name: str
    dim: int
    lagrangian: Callable[[np.ndarray, np.ndarray], float]
    grad_q: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_qdot: Callable[[np.ndarray, np.ndarray], np.ndarray]
    energy: Callable[[np.ndarray, np.ndarray], float]
    hamiltonian_rhs: Optional[Callable] = None
    exact: Optional[Callable[[float, PhasePoint], PhasePoint]] = None
    params: Optional[dict] = None

    def __call__(self, q, qdot) -> float:
        return self.lagrangian(q, qdot)

    @classmethod
    def from_lagrangian(cls, name, dim, lagrangian, energy, grad_q=None, grad_qdot=None,
                        hamiltonian_rhs=None, exact=None) -> "LagrangianSystem":
        """Build a system, filling missing gradients with central differences."""
        if grad_q is None:
            grad_q = lambda q, v: _central_gradient(lambda x: lagrangian(x, v), q)
        if grad_qdot is None:
            grad_qdot = lambda q, v: _central_gradient(lambda x: lagrangian(q, x), v)
        return cls(name, dim, lagrangian, grad_q, grad_qdot, energy, hamiltonian_rhs, exact)


def _central_gradient(f, x):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        step = _SQRT_EPS * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (xp[i] - xm[i])
    return g


def harmonic_oscillator(dim: int = 1, omega: float = 1.0) -> LagrangianSystem:
    """``L = |qdot|^2 / 2 - omega^2 |q|^2 / 2`` in ``dim`` dimensions."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    w2 = omega * omega

    def lagrangian(q, v):
        return 0.5 * np.dot(v, v) - 0.5 * w2 * np.dot(q, q)

    def energy(q, p):
        return 0.5 * np.dot(p, p) + 0.5 * w2 * np.dot(q, q)

    def exact(t, start):
        # (p, omega q) rotates by the angle omega t
        c, s = np.cos(omega * t), np.sin(omega * t)
        y0 = omega * start.q
        p = c * start.p - s * y0
        y = s * start.p + c * y0
        return PhasePoint(y / omega, p)

    return LagrangianSystem(
        name="harmonic",
        dim=dim,
        lagrangian=lagrangian,
        grad_q=lambda q, v: -w2 * q,
        grad_qdot=lambda q, v: v,
        energy=energy,
        hamiltonian_rhs=lambda q, p: (p, -w2 * q),
        exact=exact,
        params={"dim": dim, "omega": omega},
    )


def _radius(q) -> float:
    r = float(np.hypot(q[0], q[1]))
    if r == 0.0:
        raise SingularityError("Kepler potential is singular at q = 0")
    return r


def kepler(k: float = KEPLER_K) -> LagrangianSystem:
    """Planar Kepler problem ``L = |qdot|^2 / 2 + k / |q|``."""
    if k <= 0:
        raise ValueError("force constant k must be positive")

    def lagrangian(q, v):
        return 0.5 * np.dot(v, v) + k / _radius(q)

    def grad_q(q, v):
        return -k * q / _radius(q) ** 3

    def energy(q, p):
        return 0.5 * np.dot(p, p) - k / _radius(q)

    return LagrangianSystem(
        name="kepler",
        dim=2,
        lagrangian=lagrangian,
        grad_q=grad_q,
        grad_qdot=lambda q, v: v,
        energy=energy,
        hamiltonian_rhs=lambda q, p: (p, grad_q(q, p)),
        params={"k": k},
    )


def kepler_start() -> PhasePoint:
    return PhasePoint(KEPLER_Q0, KEPLER_P0)


def angular_momentum(point: PhasePoint) -> float:
    """z-component ``-p_1 q_2 + p_2 q_1`` of the planar angular momentum."""
    if point.dim != 2:
        raise ValueError(f"angular momentum needs a planar system, got dim={point.dim}")
    q, p = point.q, point.p
    return float(-p[0] * q[1] + p[1] * q[0])


def rk4_step(system: LagrangianSystem, point: PhasePoint, h: float) -> PhasePoint:
    """One classical Runge-Kutta step on Hamilton's equations."""
    if system.hamiltonian_rhs is None:
        raise ValueError(f"system {system.name!r} has no Hamiltonian vector field")
    f = system.hamiltonian_rhs
    q, p = point.q, point.p
    k1q, k1p = f(q, p)
    k2q, k2p = f(q + 0.5 * h * k1q, p + 0.5 * h * k1p)
    k3q, k3p = f(q + 0.5 * h * k2q, p + 0.5 * h * k2p)
    k4q, k4p = f(q + h * k3q, p + h * k3p)
    return PhasePoint(
        q + h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q),
        p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p),
    )


def rk4_integrate(system: LagrangianSystem, start: PhasePoint, h: float, steps: int) -> list:
    points = [start]
    for _ in range(steps):
        points.append(rk4_step(system, points[-1], h))
    return points


def default_start(system: LagrangianSystem) -> PhasePoint:
    """Initial data used by the experiments for the built-in models."""
    if system.name == "kepler":
        return kepler_start()
    if system.name == "harmonic":
        q = np.zeros(system.dim)
        p = np.zeros(system.dim)
        q[0] = 1.0
        # a nonzero angular momentum in the planar case
        p[min(1, system.dim - 1)] = 0.5
        return PhasePoint(q, p)
    raise ValueError(f"no default initial data for system {system.name!r}")


def get_model(name: str, **params) -> LagrangianSystem:
    if name == "harmonic":
        return harmonic_oscillator(int(params.get("dim", 2)), float(params.get("omega", 1.0)))
    if name == "kepler":
        return kepler(float(params.get("k", KEPLER_K)))
    raise ValueError(f"unknown model {name!r} (expected 'harmonic' or 'kepler')")
