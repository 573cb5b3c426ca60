"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import math

import numpy as np

import oracles
from conftest import B_POINT, P_1257, Q_FINAL
from hiphop.classify import (Criterion, Symmetry, arrival_defect, choreography_refine, classify_point,
                             non_choreography_check, rational_match, symmetry_class, theta_half_period)
from hiphop.continuation import ContinuationOptions, hausdorff_distance, project_onto_branch, trace_branch
from hiphop.integrate import integrate, integrate_variational
from hiphop.model import Params, derived_constants, energy
from hiphop.shoot import System, jacobian, newton_solve, residual, trivial_seeds
from hiphop.verify import compare_reduced_full

PI = math.pi
GRAD_RT_B = np.array([1.44703, 5.44591, -0.229381])
GRAD_D_B = np.array([4.58986, 17.2712, -0.727943])
CHOREO_5PI_3 = np.array([0.581691, 0.810807, 6.53465])
CHOREO_PI = np.array([1.37188, 0.717167, 6.95687])
Q_210 = np.array([1.88461, 0.175173, 4.41712])
Q_4225 = np.array([0.827163, 0.825182, 7.28011])
# SSP points closer than this to B sit where the two families cross
NEAR_B = 5e-2


def test_criterion_01_constants(acceptance, params):
    with acceptance(1, "derived constants") as rec:
        dc = derived_constants(params)
        rec.detail = f"a0={dc.a0:.8f} T0_II={dc.T0_II:.8f}"
        assert abs(dc.a0 - 1.91173) < 1e-5
        assert abs(dc.T0_II - 4.31023) < 1e-5


def test_criterion_02_frequency_bound(acceptance):
    with acceptance(2, "frequency ratio bound, N=2..100") as rec:
        bound = (4 + math.sqrt(2)) / 8
        margins = []
        for N in range(2, 101):
            dc = derived_constants(Params(N, 1.0, 1.0))
            margins.append(bound - dc.gamma_N / dc.alpha_N)
        worst = min(margins)
        rec.detail = f"min margin {worst:.3e} at N={2 + int(np.argmin(margins))}"
        # equality at N = 2 up to rounding of the ring sums
        assert worst >= -4 * np.finfo(float).eps


def test_criterion_03_variational_oracles(acceptance, params):
    with acceptance(3, "variational flow on the circle vs closed forms") as rec:
        dc = derived_constants(params)
        traj, _ = integrate_variational(dc.a0, 0.0, 2 * dc.T0_II, params, dense=True)
        t = np.linspace(0.0, 2 * dc.T0_II, 401)
        Y = traj(t)
        db, dbt, ra, rat = oracles.linear_flow(t)
        # columns: 5 base, then d/da (r, rdot, d, ddot, theta), then d/db
        err = max(np.max(np.abs(Y[:, 12] - db)), np.max(np.abs(Y[:, 13] - dbt)),
                  np.max(np.abs(Y[:, 5] - ra)), np.max(np.abs(Y[:, 6] - rat)),
                  np.max(np.abs(Y[:, 10])), np.max(np.abs(Y[:, 11])))
        rec.detail = f"max error {err:.2e}"
        assert err < 1e-8


def test_criterion_04_trivial_solution(acceptance, params):
    with acceptance(4, "circular solution over t in [0, 50]") as rec:
        dc = derived_constants(params)
        tr = integrate(dc.a0, 0.0, 50.0, params)
        _, Y = tr.sample(2001)
        Y = np.vstack([Y, tr.ys])
        dr = np.max(np.abs(Y[:, 0] - params.r0))
        dd = np.max(np.abs(Y[:, 2]))
        E = np.array([energy(y, dc.a0, params) for y in Y])
        drift = np.ptp(E)
        rec.detail = f"|r-2|={dr:.1e} |d|={dd:.1e} energy drift={drift:.1e}"
        assert dr < 1e-9 and dd < 1e-12 and drift < 1e-9


def test_criterion_05_jacobian_at_branch_point(acceptance, params):
    with acceptance(5, "Jacobian at the re-solved branch point") as rec:
        sol = newton_solve(tuple(B_POINT), System.II, params, normal=(1.0, 0.0, 0.0))
        J = jacobian(sol.point, System.II, params)
        rel_rt = np.max(np.abs(J[0] - GRAD_RT_B) / np.abs(GRAD_RT_B))
        rel_d = np.max(np.abs(J[1] - GRAD_D_B) / np.abs(GRAD_D_B))
        rec.detail = f"point {np.round(sol.point.as_array(), 6)} rel err Rt {rel_rt:.1e} D {rel_d:.1e}"
        assert rel_rt < 1e-2 and rel_d < 1e-2


def test_criterion_06_dsp_branch(acceptance, dsp_branch, params):
    with acceptance(6, "double-symmetry branch from the circle") as rec:
        _, dist_b = dsp_branch.nearest(B_POINT)
        X = dsp_branch.coords()
        small = X[X[:, 0] < 0.30]
        dist_f = float(np.min(np.linalg.norm(small - Q_FINAL, axis=1))) if len(small) else math.inf
        worst = max(np.max(np.abs(residual(bp.point, System.II, params))) for bp in dsp_branch.points)
        rec.detail = (f"{len(dsp_branch)} points, dist to B {dist_b:.1e}, a_min {X[:, 0].min():.3f}, "
                      f"dist to q_f {dist_f:.1e}, worst residual {worst:.1e}")
        assert dist_b < 1e-2
        assert dist_f < 5e-2
        assert worst < 1e-4


def test_criterion_07_bifurcation_and_switch(acceptance, dsp_candidates, ssp_branch, params):
    with acceptance(7, "bifurcation near B and single-symmetry branch") as rec:
        near = [c for c in dsp_candidates if np.linalg.norm(c.x - B_POINT) < 1e-2]
        assert len(near) == 1
        _, dist_raw = ssp_branch.nearest(P_1257)
        target = (PI / 3 + 13 * PI) / 13
        x = choreography_refine(ssp_branch, target, params, occurrence=0)
        dist = float(np.linalg.norm(x.as_array() - P_1257))
        sym = symmetry_class(x, params)
        defect = 13 * theta_half_period(x, params) - (PI / 3 + 13 * PI)
        rec.detail = (f"{len(dsp_candidates)} candidate(s), nearest trace point {dist_raw:.1e}, "
                      f"angle-matched point {dist:.1e} from P_1257, {sym.value}, 13*theta0 defect {defect:.1e}")
        assert dist_raw < 5e-2 and dist < 5e-2
        assert sym is Symmetry.SINGLE
        assert abs(defect) < 1e-3


def test_criterion_08_choreographies(acceptance, dsp_branch, params):
    with acceptance(8, "choreography refinement at 5pi/3 and pi") as rec:
        parts = []
        for target, ref in ((5 * PI / 3, CHOREO_5PI_3), (PI, CHOREO_PI)):
            x = choreography_refine(dsp_branch, target, params)
            m = rational_match(theta_half_period(x, params), params.N)
            dist = float(np.linalg.norm(x.as_array() - ref))
            arr = arrival_defect(x, m, params)
            parts.append(f"dist {dist:.1e} arrival {arr:.1e}")
            assert dist < 1e-2 and arr < 1e-6
        rec.detail = "; ".join(parts)


def test_criterion_09_trajectory_counts(acceptance, dsp_branch, params):
    with acceptance(9, "trajectory counts at two branch points") as rec:
        parts = []
        for ref, theta_ref, count in ((Q_210, 2 * PI / 3, 2), (Q_4225, 1.5 * PI, 6)):
            bp = project_onto_branch(dsp_branch, ref)
            rep = classify_point(bp.point, params)
            parts.append(f"count {rep.count} theta0-ref {rep.theta0 - theta_ref:.1e}")
            assert rep.count == count
            assert abs(rep.theta0 - theta_ref) < 1e-2
        rec.detail = "; ".join(parts)


def test_criterion_10_non_choreography(acceptance, dsp_branch, ssp_branch, params):
    with acceptance(10, "non-choreography criterion on both families") as rec:
        ssp = [bp for bp in ssp_branch.points if np.linalg.norm(bp.x - B_POINT) > NEAR_B]
        holds = [non_choreography_check(bp.point, params) for bp in ssp]
        fails = [non_choreography_check(bp.point, params) for bp in dsp_branch.points]
        rec.detail = (f"SSP {sum(h is Criterion.HOLDS for h in holds)}/{len(holds)} hold, "
                      f"DSP {sum(f is Criterion.FAILS for f in fails)}/{len(fails)} fail")
        assert all(h is Criterion.HOLDS for h in holds)
        assert all(f is Criterion.FAILS for f in fails)


def test_criterion_11_reduced_full(acceptance, dsp_branch, ssp_branch, params):
    with acceptance(11, "reduced vs full 2N-body integration") as rec:
        points = [dsp_branch.points[30].point, dsp_branch.points[90].point, ssp_branch.points[60].point]
        cmps = [compare_reduced_full(p, params) for p in points]
        dev = max(c.max_deviation for c in cmps)
        de = max(c.energy_drift for c in cmps)
        dl = max(c.angular_momentum_drift for c in cmps)
        rec.detail = f"max deviation {dev:.1e}, energy drift {de:.1e}, angular momentum drift {dl:.1e}"
        assert dev < 1e-6 and de < 1e-8 and dl < 1e-8


def test_criterion_12_property_suite(acceptance, dsp_branch, params):
    with acceptance(12, "symmetry, periodicity, Jacobian and step-halving properties") as rec:
        p0, q0 = trivial_seeds(params)
        dbl = trace_branch(p0, System.I, params, ContinuationOptions(max_points=40))
        s_frac = np.linspace(0.0, 1.0, 9)

        sym_err = per_err = rem_err = 0.0
        for bp in dbl.points[5::7]:
            a, b, T = bp.point
            tr = integrate(a, b, 4 * T, params)
            lo, hi = tr(T - s_frac * T), tr(T + s_frac * T)
            sym_err = max(sym_err, np.max(np.abs(hi[:, [0, 2]] - lo[:, [0, 2]])))
            per_err = max(per_err, np.max(np.abs(tr(4 * T)[:4] - [params.r0, 0, 0, b])))
            rem_err = max(rem_err, np.max(np.abs(residual((a, b, 2 * T), System.II, params))))
        for bp in dsp_branch.points[5::20]:
            a, b, T = bp.point
            tr = integrate(a, b, 2 * T, params)
            lo, hi = tr(T - s_frac * T), tr(T + s_frac * T)
            sym_err = max(sym_err, np.max(np.abs(hi[:, 0] - lo[:, 0])), np.max(np.abs(hi[:, 2] + lo[:, 2])))
            per_err = max(per_err, np.max(np.abs(tr(2 * T)[:4] - [params.r0, 0, 0, b])))

        fd_err = 0.0
        for x in [(1.3, 0.7, 6.0), (1.9, 0.2, 4.4), dsp_branch.points[60].point]:
            for kind in System:
                J = jacobian(x, kind, params)
                F = oracles.fd_jacobian(lambda y, k=kind: residual(tuple(y), k, params), x)
                fd_err = max(fd_err, np.max(np.abs(J - F)) / np.max(np.abs(F)))

        base = ContinuationOptions(max_arclength=1.5)
        half = ContinuationOptions(h0=base.h0 / 2, h_min=base.h_min / 2, h_max=base.h_max / 2, max_arclength=1.5)
        haus = hausdorff_distance(trace_branch(q0, System.II, params, base),
                                  trace_branch(q0, System.II, params, half))

        rec.detail = (f"symmetry {sym_err:.1e}, periodicity {per_err:.1e}, I->II {rem_err:.1e}, "
                      f"FD Jacobian {fd_err:.1e}, Hausdorff {haus:.1e}")
        assert sym_err < 1e-7 and per_err < 1e-7 and rem_err < 1e-8
        assert fd_err < 1e-5
        assert haus < 1e-4
