"""Lagrange basis over control points on [0, 1] and its quadrature tables."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .quadrature import QuadratureRule

MAX_DEGREE = 10


class ControlScheme(str, Enum):
    EQUISPACED = "equispaced"
    CHEBYSHEV_LOBATTO = "chebyshev"


@dataclass(frozen=True)
class ControlPoints:
    """Interpolation abscissae ``0 = d_0 < ... < d_s = 1``.

    ``weights`` are the barycentric weights ``1 / prod_{k != j} (d_j - d_k)``.
    """

    s: int
    d: np.ndarray
    weights: np.ndarray
    symmetric: bool

    @classmethod
    def from_points(cls, d, allow_asymmetric: bool = False) -> "ControlPoints":
        d = np.array(d, dtype=float)
        s = len(d) - 1
        if s < 1:
            raise ValueError("need at least two control points")
        if s > MAX_DEGREE:
            raise ValueError(f"degree s={s} exceeds the supported maximum of {MAX_DEGREE}")
        if d[0] != 0.0 or d[-1] != 1.0:
            raise ValueError("control points must start at 0 and end at 1")
        if np.any(np.diff(d) <= 0):
            raise ValueError("control points must be strictly increasing")
        symmetric = bool(np.all(np.abs(d + d[::-1] - 1.0) <= 1e-15))
        if not symmetric and not allow_asymmetric:
            raise ValueError("control points must satisfy d_i = 1 - d_{s-i}")
        diff = d[:, None] - d[None, :]
        np.fill_diagonal(diff, 1.0)
        w = 1.0 / np.prod(diff, axis=1)
        for arr in (d, w):
            arr.setflags(write=False)
        return cls(s, d, w, symmetric)


def make_control_points(s: int, scheme=ControlScheme.EQUISPACED) -> ControlPoints:
    if s < 1:
        raise ValueError(f"polynomial degree must be >= 1, got s={s}")
    scheme = ControlScheme(scheme)
    i = np.arange(s + 1)
    if scheme is ControlScheme.EQUISPACED:
        d = i / s
    else:
        d = (1.0 - np.cos(i * np.pi / s)) / 2.0
    # mirror the lower half so the symmetry holds exactly
    half = (s + 1) // 2
    d[s - np.arange(half)] = 1.0 - d[:half]
    if s % 2 == 0:
        d[s // 2] = 0.5
    d[0], d[-1] = 0.0, 1.0
    return ControlPoints.from_points(d)


def _others(points: ControlPoints, nu: int):
    return np.delete(points.d, nu)


def lagrange_eval(points: ControlPoints, nu: int, tau: float) -> float:
    """Value of the ``nu``-th cardinal polynomial at ``tau``."""
    if not 0 <= nu <= points.s:
        raise IndexError(f"basis index {nu} out of range 0..{points.s}")
    return float(points.weights[nu] * np.prod(tau - _others(points, nu)))


def lagrange_deriv(points: ControlPoints, nu: int, tau: float) -> float:
    """Derivative in ``tau`` of the ``nu``-th cardinal polynomial."""
    if not 0 <= nu <= points.s:
        raise IndexError(f"basis index {nu} out of range 0..{points.s}")
    factors = tau - _others(points, nu)
    total = 0.0
    for m in range(points.s):
        total += np.prod(np.delete(factors, m))
    return float(points.weights[nu] * total)


def differentiation_matrix(points: ControlPoints) -> np.ndarray:
    """``D[i, nu]`` = derivative of basis ``nu`` at control point ``d_i``."""
    d, w = points.d, points.weights
    diff = d[:, None] - d[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


@dataclass(frozen=True)
class BasisTables:
    """Basis values and slopes at the quadrature nodes and at both endpoints."""

    L: np.ndarray
    Ldot: np.ndarray
    L0: np.ndarray
    L1: np.ndarray
    Ldot0: np.ndarray
    Ldot1: np.ndarray


def _rows(points, taus, fn):
    return np.array([[fn(points, nu, t) for nu in range(points.s + 1)] for t in taus])


def make_basis_tables(points: ControlPoints, rule: QuadratureRule) -> BasisTables:
    L = _rows(points, rule.nodes, lagrange_eval)
    Ldot = _rows(points, rule.nodes, lagrange_deriv)
    D = differentiation_matrix(points)
    ends = _rows(points, [0.0, 1.0], lagrange_eval)
    arrays = (L, Ldot, ends[0], ends[1], D[0].copy(), D[-1].copy())
    for arr in arrays:
        arr.setflags(write=False)
    return BasisTables(*arrays)


def interpolate(segment_values, points: ControlPoints, tau: float, h: float):
    """Position and velocity of the interpolating polynomial at ``t = tau * h``."""
    if h == 0:
        raise ValueError("step size must be nonzero")
    values = np.asarray(segment_values, dtype=float)
    if values.shape[0] != points.s + 1:
        raise ValueError(f"expected {points.s + 1} stage values, got {values.shape[0]}")
    l = np.array([lagrange_eval(points, nu, tau) for nu in range(points.s + 1)])
    ldot = np.array([lagrange_deriv(points, nu, tau) for nu in range(points.s + 1)])
    return np.tensordot(l, values, axes=1), np.tensordot(ldot, values, axes=1) / h
