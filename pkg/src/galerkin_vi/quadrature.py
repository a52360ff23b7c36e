"""Gauss-Legendre and Gauss-Lobatto quadrature rules on [0, 1].

Nodes are found by Newton iteration on Legendre polynomials (or their
derivative for Lobatto) and then symmetrized so that ``c_i + c_{r+1-i} == 1``
holds exactly in floating point.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

MAX_POINTS = 12
_NEWTON_TOL = 1e-15


class QuadratureKind(str, Enum):
    GAUSS = "gauss"
    LOBATTO = "lobatto"

    @property
    def tag(self) -> str:
        return "Gau" if self is QuadratureKind.GAUSS else "Lob"


@dataclass(frozen=True)
class QuadratureRule:
    kind: QuadratureKind
    r: int
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def __post_init__(self):
        for arr in (self.nodes, self.weights):
            arr.setflags(write=False)

    def integrate(self, f) -> float:
        """Apply the rule to a vectorized callable on [0, 1]."""
        return float(np.dot(self.weights, f(self.nodes)))


def legendre(n: int, x):
    """Return (P_n(x), P_n'(x)) by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev, np.zeros_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    # (1 - x^2) P_n' = n (P_{n-1} - x P_n), with the closed form at x = +-1
    end = np.abs(x) == 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = n * (p_prev - x * p) / (1.0 - x * x)
    dp = np.where(end, np.sign(x) ** (n - 1) * n * (n + 1) / 2.0, dp)
    return p, dp


def _legendre_second_derivative(n, x, p, dp):
    return (2.0 * x * dp - n * (n + 1) * p) / (1.0 - x * x)


def _newton(f, x0):
    x = np.array(x0, dtype=float)
    for _ in range(100):
        dx = f(x)
        x = x - dx
        if np.max(np.abs(dx)) <= _NEWTON_TOL:
            break
    # one polish step after the tolerance is met
    return x - f(x)


def _symmetric(kind, r, x, w) -> QuadratureRule:
    """Map nodes on [-1, 1] to [0, 1] and enforce exact mirror symmetry."""
    c = np.sort((x + 1.0) / 2.0)
    b = (w / 2.0)[np.argsort(x)]
    half = r // 2
    for i in range(half):
        j = r - 1 - i
        ci = (c[i] + 1.0 - c[j]) / 2.0
        bi = (b[i] + b[j]) / 2.0
        c[i], c[j] = ci, 1.0 - ci
        b[i] = b[j] = bi
    if r % 2:
        c[half] = 0.5
    order = 2 * r if kind is QuadratureKind.GAUSS else 2 * r - 2
    return QuadratureRule(kind, r, c, b, order)


def _check_r(r: int, minimum: int, name: str):
    if not isinstance(r, (int, np.integer)) or r < minimum:
        raise ValueError(f"{name} needs at least {minimum} point(s), got r={r!r}")
    if r > MAX_POINTS:
        raise ValueError(f"r={r} exceeds the supported maximum of {MAX_POINTS}")


def gauss_legendre(r: int) -> QuadratureRule:
    """Gauss-Legendre rule with ``r`` points, exact for degree ``2r - 1``."""
    _check_r(r, 1, "Gauss-Legendre")
    k = np.arange(1, r + 1)
    guess = np.cos(np.pi * (k - 0.25) / (r + 0.5))

    def update(x):
        p, dp = legendre(r, x)
        return p / dp

    x = _newton(update, guess)
    _, dp = legendre(r, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    return _symmetric(QuadratureKind.GAUSS, r, x, w)


def gauss_lobatto(r: int) -> QuadratureRule:
    """Gauss-Lobatto rule with ``r`` points including both endpoints."""
    _check_r(r, 2, "Gauss-Lobatto")
    n = r - 1
    x = np.array([-1.0, 1.0])
    if r > 2:
        # interior nodes are the roots of P'_{r-1}
        k = np.arange(1, r - 1)
        guess = np.cos(np.pi * k / n)

        def update(x):
            p, dp = legendre(n, x)
            return dp / _legendre_second_derivative(n, x, p, dp)

        x = np.concatenate(([-1.0], _newton(update, guess), [1.0]))
    p, _ = legendre(n, x)
    w = 2.0 / (n * (n + 1) * p * p)
    return _symmetric(QuadratureKind.LOBATTO, r, x, w)


def make_rule(kind, r: int) -> QuadratureRule:
    kind = QuadratureKind(kind)
    return gauss_legendre(r) if kind is QuadratureKind.GAUSS else gauss_lobatto(r)


def verify_exactness(rule: QuadratureRule, tol: float = 1e-13, tight: float = 1e-6) -> bool:
    """Check that ``rule`` integrates polynomials of degree < ``rule.order``.

    Exactness is tested on the monomials ``tau**k``.  Tightness is tested on
    the shifted Legendre polynomial of degree ``order``, whose integral over
    [0, 1] vanishes; a rule of the declared order cannot integrate it.
    """
    c = np.asarray(rule.nodes)
    b = np.asarray(rule.weights)
    for k in range(rule.order):
        if abs(np.dot(b, c**k) - 1.0 / (k + 1)) > tol:
            return False
    p, _ = legendre(rule.order, 2.0 * c - 1.0)
    return abs(float(np.dot(b, p))) > tight
