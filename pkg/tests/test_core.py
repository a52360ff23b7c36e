import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from conftest import GAUSS_FAMILY, LOBATTO_FAMILY, harmonic_step_oracles, spec
from galerkin_vi.basis import ControlPoints, ControlScheme
from galerkin_vi.core import (IntegrationFailure, Segment, SpecError, WellPosednessWarning,
                              del_gradient, discrete_lagrangian, hamiltonian_step, initial_step,
                              integrate, interior_residuals, legendre_minus, legendre_plus,
                              make_spec, parse_spec, solve_segment, step)
from galerkin_vi.models import PhasePoint, angular_momentum, kepler_start
from galerkin_vi.solver import SolverSettings

ORACLES = harmonic_step_oracles()


def seg(stages, h, k=0):
    return Segment(k, np.array(stages, dtype=float).reshape(len(stages), -1), h)


# -- spec assembly -----------------------------------------------------------

def test_spec_names_and_orders():
    assert make_spec(1, 1).name == "P1N1Q2Gau"
    sp = make_spec(3, 4, "lobatto")
    assert sp.name == "P3N4Q6Lob"
    assert sp.expected_order == 6 and sp.symmetric and sp.well_posed
    assert make_spec(2, 4, "gauss").expected_order == 4
    assert make_spec(4, 5, "lobatto").expected_order == 8


def test_s_greater_than_r_rejected_unless_overridden():
    with pytest.raises(SpecError):
        make_spec(3, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert make_spec(3, 2, allow_s_gt_r=True).s == 3
    with pytest.raises(SpecError):
        make_spec(0, 1)
    with pytest.raises(SpecError):
        make_spec(1, 1, "lobatto")


def test_well_posedness_flag():
    # PsNsQ(2s-2)Lob has u = 2s - 2 < 2s - 1
    with pytest.warns(WellPosednessWarning):
        sp = make_spec(3, 3, "lobatto")
    assert not sp.well_posed and sp.warning
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert make_spec(3, 4, "lobatto").well_posed


def test_parse_spec():
    assert parse_spec("s3r4lobatto") == (3, 4, make_spec(3, 4, "lobatto").kind)
    assert parse_spec("P2N2Q4Gau")[:2] == (2, 2)
    assert parse_spec("p1n2lob")[:2] == (1, 2)
    assert parse_spec("s1r1gauss")[2].tag == "Gau"
    for bad in ("P2N2Q6Gau", "P3N4Q8Lob", "s3x4gauss", ""):
        with pytest.raises(SpecError):
            parse_spec(bad)


# -- discrete Lagrangian and its derivatives ---------------------------------

def test_discrete_lagrangian_examples(ho1):
    assert discrete_lagrangian(make_spec(1, 1), ho1, seg([1, 1], 0.1)) == pytest.approx(-0.05)
    assert discrete_lagrangian(make_spec(1, 2, "lobatto"), ho1, seg([0, 1], 1.0)) == pytest.approx(0.25)


def test_simpson_discrete_lagrangian_expansion(kep):
    sp = make_spec(2, 3, "lobatto")
    h = 0.3
    q0, q1, q2 = np.array([5.0, 0.1]), np.array([4.9, 0.8]), np.array([4.6, 1.5])
    L = kep.lagrangian
    expected = (h / 6 * L(q0, (-3 * q0 + 4 * q1 - q2) / h) + 2 * h / 3 * L(q1, (q2 - q0) / h)
                + h / 6 * L(q2, (q0 - 4 * q1 + 3 * q2) / h))
    assert discrete_lagrangian(sp, kep, seg([q0, q1, q2], h)) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("s,r,kind", [(1, 1, "gauss"), (2, 3, "lobatto"), (3, 3, "gauss"),
                                      (3, 4, "lobatto"), (4, 5, "lobatto")])
def test_del_gradient_matches_finite_differences(s, r, kind, kep, ho2):
    sp = spec(s, r, kind)
    rng = np.random.default_rng(s + r)
    for system, base in ((kep, np.array([5.0, 0.0])), (ho2, np.zeros(2))):
        for _ in range(5):
            X = base + rng.normal(0, 0.5, (s + 1, 2))
            h = rng.uniform(0.05, 0.5)
            G = del_gradient(sp, system, seg(X, h))
            eps = 1e-6
            fd = np.zeros_like(X)
            for idx in np.ndindex(*X.shape):
                Xp, Xm = X.copy(), X.copy()
                Xp[idx] += eps
                Xm[idx] -= eps
                fd[idx] = (discrete_lagrangian(sp, system, seg(Xp, h))
                           - discrete_lagrangian(sp, system, seg(Xm, h))) / (2 * eps)
            assert_allclose(G, fd, atol=1e-6, rtol=1e-6)
            # directional derivative along all stages at once
            V = rng.normal(size=X.shape)
            dd = (discrete_lagrangian(sp, system, seg(X + eps * V, h))
                  - discrete_lagrangian(sp, system, seg(X - eps * V, h))) / (2 * eps)
            assert np.sum(G * V) == pytest.approx(dd, abs=1e-6, rel=1e-6)


def test_constant_stages_gradient(ho1):
    sp = make_spec(3, 4, "lobatto")
    h, q = 0.2, 0.7
    G = del_gradient(sp, ho1, seg([q] * 4, h))
    expected = -h * q * (sp.rule.weights @ sp.tables.L)
    assert_allclose(G[:, 0], expected, atol=1e-15)


def test_interior_residuals(ho1):
    assert interior_residuals(make_spec(1, 1), ho1, seg([1, 2], 0.1)).shape == (0, 1)
    res = interior_residuals(make_spec(2, 3, "lobatto"), ho1, seg([1, 1, 1], 0.1))
    # d/dq1 of the Simpson form: only the middle potential term survives
    assert_allclose(res, [[-2 * 0.1 / 3]], atol=1e-15)


def test_midpoint_legendre_transforms(ho1):
    sp = make_spec(1, 1)
    h, q0, q1 = 0.1, 0.3, 0.8
    p_minus = (q1 - q0) / h + h / 4 * (q0 + q1)
    p_plus = (q1 - q0) / h - h / 4 * (q0 + q1)
    s = seg([q0, q1], h)
    assert legendre_minus(sp, ho1, s).p[0] == pytest.approx(p_minus, abs=1e-12)
    assert legendre_plus(sp, ho1, s).p[0] == pytest.approx(p_plus, abs=1e-12)
    assert legendre_minus(sp, ho1, seg([0, 0], h)).p[0] == 0


def test_verlet_legendre_transforms(ho1):
    sp = make_spec(1, 2, "lobatto")
    h, q0, q1 = 0.1, 0.3, 0.8
    s = seg([q0, q1], h)
    assert legendre_minus(sp, ho1, s).p[0] == pytest.approx((q1 - q0) / h + h / 2 * q0, abs=1e-12)
    assert legendre_plus(sp, ho1, s).p[0] == pytest.approx((q1 - q0) / h - h / 2 * q1, abs=1e-12)


def test_legendre_warns_off_solution(ho1):
    with pytest.warns(RuntimeWarning):
        legendre_plus(make_spec(2, 3, "lobatto"), ho1, seg([0, 1, 0], 0.1))


def test_reflected_stages_swap_transforms(kep):
    sp = make_spec(3, 4, "lobatto")
    h = 0.2
    fwd = solve_segment(sp, kep, kepler_start(), h)
    back = seg(fwd.stages[::-1], h)
    assert_allclose(legendre_minus(sp, kep, back).p, -legendre_plus(sp, kep, fwd).p, atol=1e-12)


# -- stepping ----------------------------------------------------------------

def test_verlet_step_example(ho1):
    sp = make_spec(1, 2, "lobatto")
    nxt = step(sp, ho1, seg([1, 1], 0.1))
    assert nxt.end[0] == pytest.approx(0.99, abs=1e-13)
    assert nxt.start[0] == 1.0 and nxt.k == 1


@pytest.mark.parametrize("s,r,kind", GAUSS_FAMILY + LOBATTO_FAMILY)
def test_zero_is_fixed_point(s, r, kind, ho2):
    sg = initial_step(spec(s, r, kind), ho2, PhasePoint([0, 0], [0, 0]), 0.3)
    assert np.all(sg.stages == 0)


def test_small_step_limit(ho1):
    sg = initial_step(make_spec(3, 4, "lobatto"), ho1, PhasePoint([1.0], [0.0]), 1e-6)
    assert_allclose(sg.stages, 1.0, atol=1e-11)


@pytest.mark.parametrize("s,r,kind", [(1, 1, "gauss"), (2, 3, "lobatto"), (4, 4, "gauss")])
def test_solved_segment_reproduces_momentum(s, r, kind, kep):
    sp = spec(s, r, kind)
    start = kepler_start()
    sg = solve_segment(sp, kep, start, 0.1)
    assert_allclose(legendre_minus(sp, kep, sg).p, start.p, atol=1e-11)
    assert np.max(np.abs(interior_residuals(sp, kep, sg)), initial=0) <= sp.settings.residual_tol


@pytest.mark.parametrize("name,s,r,kind", [("midpoint", 1, 1, "gauss"), ("verlet", 1, 2, "lobatto"),
                                           ("gauss2", 2, 2, "gauss")])
def test_known_method_equivalence(name, s, r, kind, ho1):
    sp = make_spec(s, r, kind)
    oracle = ORACLES[name]
    rng = np.random.default_rng(11)
    for _ in range(20):
        z = rng.normal(size=2)
        h = rng.uniform(0.05, 0.5)
        out = hamiltonian_step(sp, ho1, PhasePoint([z[0]], [z[1]]), h)
        assert_allclose(out.as_vector(), oracle(z, h), atol=1e-12)


def test_midpoint_equivalence_nonlinear(kep):
    # implicit midpoint by fixed-point iteration, independent of the Newton solver
    sp = make_spec(1, 1)
    h = 0.05
    z = np.array([5.0, 0.0, 0.0, 17.0])

    def f(w):
        return np.concatenate([w[2:], kep.grad_q(w[:2], w[2:])])

    z1 = z.copy()
    for _ in range(200):
        z1 = z + h * f((z + z1) / 2)
    out = hamiltonian_step(sp, kep, kepler_start(), h)
    assert_allclose(out.as_vector(), z1, atol=1e-11)


def test_control_point_scheme_does_not_change_the_map(kep):
    # the stationary polynomial is independent of how the space is parameterized
    start = kepler_start()
    a = hamiltonian_step(make_spec(4, 5, "lobatto"), kep, start, 0.1)
    b = hamiltonian_step(make_spec(4, 5, "lobatto", scheme=ControlScheme.CHEBYSHEV_LOBATTO), kep, start, 0.1)
    assert_allclose(a.as_vector(), b.as_vector(), atol=1e-11)


def test_integrate_chaining_and_momentum_matching(kep):
    sp = make_spec(3, 4, "lobatto")
    traj = integrate(sp, kep, kepler_start(), 0.125, 40)
    assert traj.steps == 40 and len(traj.phase_points) == 41
    assert traj.times[-1] == pytest.approx(5.0)
    for a, b in zip(traj.segments, traj.segments[1:]):
        assert np.array_equal(a.end, b.start)
        p_plus = legendre_plus(sp, kep, a).p
        p_minus = legendre_minus(sp, kep, b).p
        assert_allclose(p_plus, p_minus, atol=1e-10)
    assert all(1 <= it <= 10 for it in traj.iterations)


def test_angular_momentum_preserved_on_kepler(kep):
    traj = integrate(make_spec(2, 3, "lobatto"), kep, kepler_start(), 0.125, 200)
    dev = max(abs(angular_momentum(pt) - 85.0) for pt in traj.phase_points)
    assert dev <= 1e-10


def test_integrate_rejects_zero_steps(ho1):
    with pytest.raises(ValueError):
        integrate(make_spec(1, 1), ho1, PhasePoint([1.0], [0.0]), 0.1, 0)
    with pytest.raises(ValueError):
        solve_segment(make_spec(1, 1), ho1, PhasePoint([1.0], [0.0]), 0.0)


def test_integration_failure_keeps_partial_trajectory(kep):
    sp = make_spec(1, 1, settings=SolverSettings(max_iterations=3))
    with pytest.raises(IntegrationFailure) as info:
        integrate(sp, kep, kepler_start(), 0.5, 20)
    exc = info.value
    assert exc.trajectory.steps == exc.step_index
    assert not exc.report.converged


def test_newton_iterations_harmonic_warm_start(ho1):
    traj = integrate(make_spec(2, 3, "lobatto"), ho1, PhasePoint([1.0], [0.0]), 0.25, 20)
    assert max(traj.iterations) <= 5


def test_asymmetric_points_need_override():
    pts = ControlPoints.from_points([0, 0.3, 1], allow_asymmetric=True)
    sp = make_spec(2, 3, "lobatto", points=pts)
    assert not sp.symmetric
    with pytest.raises(SpecError):
        make_spec(3, 3, points=pts)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(GAUSS_FAMILY + LOBATTO_FAMILY),
       st.lists(st.floats(-2, 2), min_size=4, max_size=4), st.floats(0.02, 0.5))
def test_reversibility_property(triple, z, h):
    from galerkin_vi.models import harmonic_oscillator
    ho = harmonic_oscillator(2)
    sp = spec(*triple)
    start = PhasePoint(z[:2], z[2:])
    back = hamiltonian_step(sp, ho, hamiltonian_step(sp, ho, start, h), -h)
    assert_allclose(back.as_vector(), start.as_vector(), atol=1e-11)
