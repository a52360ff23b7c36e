import numpy as np
import pytest
from numpy.testing import assert_allclose

from galerkin_vi.solver import (JacobianMode, NonConvergence, SolverSettings, fd_jacobian,
                                newton_solve)


def test_affine_residual_converges():
    a = np.array([1.5, -2.0, 3.0])
    x, rep = newton_solve(lambda x: x - a, np.zeros(3))
    assert_allclose(x, a)
    assert rep.converged and rep.iterations == 1


def test_linear_system_one_iteration_with_exact_jacobian():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    b = rng.normal(size=4)
    x, rep = newton_solve(lambda x: A @ x - b, np.zeros(4), jacobian=lambda x: A)
    assert rep.iterations == 1
    assert_allclose(A @ x, b, atol=1e-12)
    # finite-difference Jacobians carry an O(sqrt(eps)) relative error
    _, rep = newton_solve(lambda x: A @ x - b, np.zeros(4))
    assert rep.iterations <= 2


def test_scalar_quadratic():
    x, rep = newton_solve(lambda x: x ** 2 - 4, np.array([3.0]))
    assert x[0] == pytest.approx(2.0)
    assert rep.iterations <= 10
    assert rep.final_residual <= 1e-12


def test_non_convergence_raises_with_report():
    with pytest.raises(NonConvergence) as info:
        newton_solve(lambda x: x ** 2 + 1, np.array([0.5]), SolverSettings(max_iterations=5))
    rep = info.value.report
    assert not rep.converged
    assert rep.final_residual > 1e-12
    x, rep = newton_solve(lambda x: x ** 2 + 1, np.array([0.5]), check=False)
    assert not rep.converged


def test_damping_rescues_newton_on_arctan():
    # undamped Newton on arctan diverges from x0 = 2
    x, rep = newton_solve(np.arctan, np.array([2.0]))
    assert rep.converged and abs(x[0]) < 1e-12


def test_accepted_iterates_decrease():
    x = np.array([2.0])
    prev = abs(np.arctan(x[0]))
    for _ in range(30):
        x, rep = newton_solve(np.arctan, x, SolverSettings(max_iterations=1), check=False)
        cur = abs(np.arctan(x[0]))
        assert cur <= prev
        prev = cur
        if rep.converged:
            break
    assert prev <= 1e-12


@pytest.mark.parametrize("mode", list(JacobianMode))
def test_fd_jacobian(mode):
    f = lambda x: np.array([np.sin(x[0]) * x[1], x[0] ** 2 - np.exp(x[1])])
    x = np.array([0.3, -0.4])
    exact = np.array([[np.cos(0.3) * -0.4, np.sin(0.3)], [0.6, -np.exp(-0.4)]])
    tol = 1e-9 if mode is JacobianMode.CENTRAL else 1e-6
    assert_allclose(fd_jacobian(f, x, mode=mode), exact, atol=tol)


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(residual_tol=0)
    with pytest.raises(ValueError):
        SolverSettings(max_iterations=0)
    assert SolverSettings().with_tol(1e-8).residual_tol == 1e-8
    assert SolverSettings(jacobian_mode="forward").jacobian_mode is JacobianMode.FORWARD
