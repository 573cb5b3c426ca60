import numpy as np
import pytest

import oracles
from hiphop.errors import NoConvergence, SingularJacobian
from hiphop.integrate import IntegratorOptions, final_state
from hiphop.model import derived_constants
from hiphop.shoot import (ShootPoint, System, evaluate, fixed_coordinate, jacobian, newton_solve, residual,
                          trivial_seeds)

TIGHT = IntegratorOptions(rel_tol=1e-13, abs_tol=1e-15)


def test_trivial_seeds(params):
    p0, q0 = trivial_seeds(params)
    assert p0 == pytest.approx((oracles.A0_3, 0.0, oracles.T0_I_3), rel=1e-14)
    assert q0 == pytest.approx((oracles.A0_3, 0.0, oracles.T0_II_3), rel=1e-14)
    assert np.max(np.abs(residual(p0, System.I, params))) < 1e-14
    assert np.max(np.abs(residual(q0, System.II, params))) < 1e-14


def test_residual_selects_components(params):
    y = final_state(1.3, 0.6, 5.0, params)
    np.testing.assert_array_equal(residual((1.3, 0.6, 5.0), System.I, params), [y[1], y[3]])
    np.testing.assert_array_equal(residual((1.3, 0.6, 5.0), "II", params), [y[1], y[2]])
    np.testing.assert_allclose(residual((1.3, 0.6, 5.0), System.II, params, reduced=True), [y[1], y[2] / 0.6])
    with pytest.raises(ValueError):
        residual((1.3, 0.0, 5.0), System.II, params, reduced=True)
    with pytest.raises(ValueError):
        residual((1.3, 0.6, 0.0), System.II, params)


@pytest.mark.parametrize("kind", [System.I, System.II])
@pytest.mark.parametrize("point", [(1.9, 0.15, 4.4), (1.35, 0.73, 7.05), (0.9, 0.56, 3.6), (1.1, 0.3, 2.2)])
def test_jacobian_matches_finite_differences(params, kind, point):
    J = jacobian(point, kind, params, TIGHT)
    fd = oracles.fd_jacobian(lambda x: residual(ShootPoint(*x), kind, params, TIGHT), point)
    scale = np.max(np.abs(fd), axis=1, keepdims=True)
    assert np.max(np.abs(J - fd) / scale) < 1e-5


def test_jacobian_on_circle(params):
    p0, q0 = trivial_seeds(params)
    dc = derived_constants(params)
    _, J = evaluate(q0, System.II, params)
    # the vertical row vanishes at the first vertical half period
    assert np.max(np.abs(J[1])) < 1e-9
    assert J[0, 0] == pytest.approx(2 / params.r0 * np.sin(dc.omega * dc.T0_II), abs=1e-9)
    _, J = evaluate(p0, System.I, params)
    assert np.max(np.abs(J[1])) < 1e-9


def test_newton_converges_with_fixed_amplitude(params):
    _, q0 = trivial_seeds(params)
    normal, anchor = fixed_coordinate(1, 0.05)
    res = newton_solve(ShootPoint(q0.a, 0.05, q0.T), System.II, params, normal, anchor)
    assert res.converged
    assert res.point.b == 0.05
    assert np.max(np.abs(residual(res.point, System.II, params))) < 1e-10
    assert res.point.T > q0.T and res.point.a < q0.a


def test_newton_returns_immediately_at_a_root(params):
    _, q0 = trivial_seeds(params)
    res = newton_solve(q0, System.II, params, [0, 1, 0])
    assert res.iterations == 0


def test_newton_divergence_is_reported(params):
    normal, anchor = fixed_coordinate(1, 5.0)
    with pytest.raises(NoConvergence):
        newton_solve((10.0, 5.0, 1.0), System.II, params, normal, anchor)


def test_singular_bordered_system_is_reported(params):
    # on b = 0 the vertical row is parallel to the b-axis
    with pytest.raises(SingularJacobian):
        newton_solve((1.9, 0.0, 4.31), System.II, params, [0.0, 1.0, 0.0])


def test_double_period_point_solves_single_period_system(params):
    # a system-I solution at T is a system-II solution at 2T
    normal, anchor = fixed_coordinate(1, 0.3)
    p0, _ = trivial_seeds(params)
    res = newton_solve((p0.a, 0.3, p0.T), System.I, params, normal, anchor)
    a, b, T = res.point
    assert np.max(np.abs(residual((a, b, 2 * T), System.II, params))) < 1e-8
