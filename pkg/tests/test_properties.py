import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiphop.classify import rational_match
from hiphop.cli import parse_angle
from hiphop.continuation import ContinuationOptions, trace_branch
from hiphop.integrate import IntegratorOptions, continue_trajectory, integrate
from hiphop.model import Params, ReducedState, derived_constants, energy
from hiphop.shoot import System, jacobian, trivial_seeds
from hiphop.verify import angular_momentum, center_of_mass, embed

SLOW = settings(max_examples=25, deadline=None)


@pytest.fixture(scope="module")
def system_one_branch(params):
    p0, _ = trivial_seeds(params)
    return trace_branch(p0, System.I, params, ContinuationOptions(max_points=40))


@given(N=st.integers(2, 100))
def test_frequency_ratio_bound(N):
    dc = derived_constants(Params(N, 1.0, 1.0))
    # equality holds at N = 2
    assert dc.gamma_N / dc.alpha_N <= (4 + math.sqrt(2)) / 8 * (1 + 1e-15)


@SLOW
@given(a=st.floats(0.8, 2.5), b=st.floats(0.0, 0.9), t=st.floats(0.1, 6.0))
def test_time_reversal(params, a, b, t):
    fwd = integrate(a, b, t, params).ys[-1]
    bwd = integrate(a, b, -t, params).ys[-1]
    assert bwd[0] == pytest.approx(fwd[0], abs=1e-8)
    assert bwd[2] == pytest.approx(-fwd[2], abs=1e-8)
    assert bwd[4] == pytest.approx(-fwd[4], abs=1e-8)


@SLOW
@given(a=st.floats(0.8, 2.5), b=st.floats(0.0, 0.9), t1=st.floats(0.5, 3.0), t2=st.floats(3.0, 6.0))
def test_semigroup(params, a, b, t1, t2):
    opts = IntegratorOptions()
    split = continue_trajectory(integrate(a, b, t1, params, opts), a, t2, params, opts).ys[-1]
    whole = integrate(a, b, t2, params, opts).ys[-1]
    np.testing.assert_allclose(split, whole, atol=1e-8)


@SLOW
@given(a=st.floats(0.8, 2.5), b=st.floats(0.0, 0.9))
def test_energy_drift(params, a, b):
    tr = integrate(a, b, 10.0, params)
    e = np.array([energy(y, a, params) for y in tr.ys[:: max(1, len(tr.ys) // 20)]])
    # close radial approaches at small a cost about a decade over the step tolerance
    assert np.ptp(e) < 1e-8 * max(1.0, abs(e[0]))


@given(theta=st.floats(0.05, 6.2), k_max=st.integers(1, 40))
def test_match_shifts_by_full_turns(theta, k_max):
    m1 = rational_match(theta, 3, k_max, tol=1e-2)
    m2 = rational_match(theta + 2 * math.pi, 3, k_max, tol=1e-2)
    if m1 is None:
        assert m2 is None
    else:
        assert (m2.k0, m2.j0, m2.l) == (m1.k0, m1.j0, m1.l + m1.k0)
        assert m2.defect == pytest.approx(m1.defect, abs=1e-9)


@given(p=st.integers(1, 40), q=st.integers(1, 40))
def test_angle_parsing(p, q):
    assert parse_angle(f"{p}pi/{q}") == p * math.pi / q


@given(N=st.integers(2, 8), r=st.floats(0.2, 4.0), rd=st.floats(-2, 2), d=st.floats(-2, 2),
       dd=st.floats(-2, 2), th=st.floats(0, 7), a=st.floats(0.0, 3.0))
def test_embedding_invariants(N, r, rd, d, dd, th, a):
    p = Params(N, 1.0, 2.0)
    fs = embed(ReducedState(r, rd, d, dd, th), a, p)
    assert np.max(np.abs(center_of_mass(fs))) < 1e-12 * max(1.0, r, abs(d))
    assert angular_momentum(fs, p)[2] == pytest.approx(2 * N * a, abs=1e-12)


@SLOW
@given(i=st.integers(1, 39), frac=st.floats(0.0, 1.0))
def test_double_symmetry_sampling(system_one_branch, params, i, frac):
    """System-I points: r and d are even about T, and the motion repeats after 4T."""
    a, b, T = system_one_branch.points[i].point
    tr = integrate(a, b, 4 * T, params)
    s = frac * T
    lo, hi = tr(T - s), tr(T + s)
    assert hi[0] == pytest.approx(lo[0], abs=1e-7)
    assert hi[2] == pytest.approx(lo[2], abs=1e-7)
    np.testing.assert_allclose(tr(4 * T)[:4], [params.r0, 0.0, 0.0, b], atol=1e-7)


@SLOW
@given(i=st.integers(1, 120), frac=st.floats(0.0, 1.0))
def test_single_symmetry_sampling(dsp_branch, params, i, frac):
    """System-II points: r even and d odd about T, and the motion repeats after 2T."""
    bp = dsp_branch.points[min(i, len(dsp_branch) - 1)]
    a, b, T = bp.point
    tr = integrate(a, b, 2 * T, params)
    s = frac * T
    lo, hi = tr(T - s), tr(T + s)
    assert hi[0] == pytest.approx(lo[0], abs=1e-7)
    assert hi[2] == pytest.approx(-lo[2], abs=1e-7)
    np.testing.assert_allclose(tr(2 * T)[:4], [params.r0, 0.0, 0.0, b], atol=1e-7)


@SLOW
@given(i=st.integers(1, 39))
def test_double_points_solve_the_other_system_at_twice_the_time(system_one_branch, params, i):
    from hiphop.shoot import residual

    a, b, T = system_one_branch.points[i].point
    assert np.max(np.abs(residual((a, b, 2 * T), System.II, params))) < 1e-8


@SLOW
@given(i=st.integers(1, 120))
def test_tangents_are_orthogonal_to_gradients(dsp_branch, params, i):
    bp = dsp_branch.points[min(i, len(dsp_branch) - 1)]
    J = jacobian(bp.point, System.II, params, dsp_branch.integrator_options)
    assert np.max(np.abs(J @ bp.tangent) / np.linalg.norm(J, axis=1)) < 1e-8
