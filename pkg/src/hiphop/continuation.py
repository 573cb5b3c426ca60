"""Pseudo-arclength continuation of shooting-solution curves in ``(a, b, T)`` space.

Branches are traced with an Euler predictor along the unit tangent and a
Newton corrector restricted to the hyperplane orthogonal to it.  Branch points
(where the two residual gradients become dependent) are located along a traced
branch and used to switch onto the crossing family.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import (CollisionError, NoConvergence, NoNewBranch, RankDeficient, SeedRejected,
                     SingularJacobian, StepFailure)
from .integrate import IntegratorOptions, integrate, integrate_variational
from .model import Params, _sums, derived_constants, pack_params, ring_coefficients
from .shoot import ShootPoint, System, evaluate, newton_solve

log = logging.getLogger(__name__)

_FAILURES = (NoConvergence, SingularJacobian, CollisionError, StepFailure)

# Branch points must re-validate below the Newton tolerance, so the flow is
# resolved well below it by default.
BRANCH_INTEGRATOR = IntegratorOptions(rel_tol=1e-12, abs_tol=1e-14)


@dataclass(frozen=True)
class ContinuationOptions:
    h0: float = 0.02
    h_min: float = 1e-5
    h_max: float = 0.05
    max_points: int = 2000
    max_arclength: float = np.inf
    bif_angle_threshold: float = 1e-3
    tol: float = 1e-10
    a_min: float | None = None
    T_max: float | None = None
    collision_factor: float = 100.0  # stop when an orbit comes within this many rho_min
    escape_trivial: bool = True
    stop_on_trivial: bool = True  # end the trace once it runs along the circular line
    grow: float = 1.3
    easy_iterations: int = 3
    min_tangent_cos: float = 0.95
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not 0 < self.h_min <= self.h0 <= self.h_max:
            raise ValueError("need 0 < h_min <= h0 <= h_max")


@dataclass
class BranchPoint:
    point: ShootPoint
    residual: np.ndarray
    tangent: np.ndarray
    theta0: float
    jacobian: np.ndarray
    grad_angle_sin: float = field(init=False)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.point = ShootPoint(*self.point)
        self.residual = np.asarray(self.residual, dtype=float)
        self.tangent = np.asarray(self.tangent, dtype=float)
        self.jacobian = np.asarray(self.jacobian, dtype=float)
        self.grad_angle_sin = abs(signed_angle_sin(self.jacobian, self.tangent))

    @property
    def residual_norm(self) -> float:
        return float(np.max(np.abs(self.residual)))

    @property
    def x(self) -> np.ndarray:
        return self.point.as_array()


@dataclass
class Branch:
    kind: System
    points: list[BranchPoint]
    metadata: dict

    def __len__(self):
        return len(self.points)

    def coords(self) -> np.ndarray:
        return np.array([p.x for p in self.points])

    def arclength(self) -> np.ndarray:
        X = self.coords()
        if len(X) == 0:
            return np.zeros(0)
        return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(X, axis=0), axis=1))])

    def nearest(self, target) -> tuple[int, float]:
        """Index of and distance to the branch point closest to ``target``."""
        dist = np.linalg.norm(self.coords() - np.asarray(target, dtype=float), axis=1)
        i = int(np.argmin(dist))
        return i, float(dist[i])

    @property
    def params(self) -> Params:
        return Params(**self.metadata["params"])

    @property
    def integrator_options(self) -> IntegratorOptions:
        return _options_from_dict(IntegratorOptions, self.metadata.get("integrator", {}))


def signed_angle_sin(J: np.ndarray, tangent: np.ndarray) -> float:
    """``(r1 x r2) . t / (|r1||r2|)``: sine of the angle between the rows, signed by the tangent."""
    r1, r2 = J
    n1, n2 = np.linalg.norm(r1), np.linalg.norm(r2)
    if n1 == 0.0 or n2 == 0.0:
        return 0.0
    return float(np.cross(r1, r2) @ tangent / (n1 * n2))


def _trivial_reduced_rows(point: ShootPoint, kind: System, params, opts, J):
    """Jacobian rows of ``(R_t, D/b)`` (system II) or ``(R_t, D_t/b)`` (system I) at ``b = 0``.

    ``D`` is odd in ``b``, so ``d(D/b)/db`` vanishes there; the a-derivative of
    ``D_b`` is taken by central differences of the variational solution.
    """
    idx = 2 if kind is System.II else 3
    eps = 1e-6 * max(1.0, abs(point.a))
    vals = []
    for s in (1.0, -1.0):
        _, vs = integrate_variational(point.a + s * eps, 0.0, point.T, params, opts)
        vals.append(vs.d_db[idx])
    _, vs = integrate_variational(point.a, 0.0, point.T, params, opts)
    Db = vs.d_db[idx]
    if kind is System.II:
        dT = vs.dDdotdb
    else:
        # time derivative of ddot_b is the linearised vertical force acting on D_b
        p = pack_params(point.a, params, None if opts is None else opts.rho_min)
        st, f, g, *_ = _sums(vs.base.r, 0.0, p, False)
        dT = -0.5 * params.m * g * vs.dDdb
    return Db, np.array([J[0], [(vals[0] - vals[1]) / (2 * eps), 0.0, dT]])


def _orient(v, previous):
    if previous is not None:
        return v if v @ previous >= 0 else -v
    for k in (1, 2, 0):
        if abs(v[k]) > 1e-12:
            return v if v[k] > 0 else -v
    return v


def tangent_at(point: ShootPoint, kind: System, params: Params, previous=None,
               threshold: float = 1e-3, opts: IntegratorOptions | None = None,
               residual_tol: float = 1e-8) -> np.ndarray:
    """Unit null vector of the 2x3 Jacobian at ``point``.

    Oriented along ``previous`` when given, otherwise toward increasing ``b``.
    On the circular line ``b = 0`` at a root of the reduced residual (the
    bifurcation points of the circular family) the reduced rows are used, so
    the returned direction is the one of the emanating non-trivial branch.

    Raises
    ------
    RankDeficient
        When the rows are parallel to within ``threshold`` (sine of angle).
    """
    point = ShootPoint(*point)
    kind = System(kind)
    _, J = evaluate(point, kind, params, opts)
    if point.b == 0.0:
        Dhat, Jr = _trivial_reduced_rows(point, kind, params, opts, J)
        if abs(Dhat) < residual_tol:
            J = Jr
    r1, r2 = J
    c = np.cross(r1, r2)
    n1, n2 = np.linalg.norm(r1), np.linalg.norm(r2)
    s = np.linalg.norm(c) / (n1 * n2) if n1 > 0 and n2 > 0 else 0.0
    if s < threshold:
        raise RankDeficient(f"Jacobian rows are parallel (sin angle {s:.3e})", s)
    return _orient(c / np.linalg.norm(c), previous)


def _bordered_tangent(J, t_prev):
    A = np.vstack([J, t_prev])
    v = np.linalg.solve(A, np.array([0.0, 0.0, 1.0]))
    return v / np.linalg.norm(v)


def _min_pair_distance(point: ShootPoint, params, opts) -> float:
    traj = integrate(point.a, point.b, point.T, params, opts)
    s2, c2 = ring_coefficients(params.N)
    r = traj.ys[:, 0][:, None]
    d = traj.ys[:, 2][:, None]
    return float(np.sqrt((4 * r * r * s2 + c2 * d * d).min()))


def make_branch_point(point: ShootPoint, kind: System, params: Params, tangent,
                      opts: IntegratorOptions | None = None) -> BranchPoint:
    point = ShootPoint(*point)
    res, J = evaluate(point, kind, params, opts)
    _, vs = integrate_variational(point.a, point.b, point.T, params, opts)
    return BranchPoint(point, res, tangent, vs.base.theta, J)


def _is_trivial(x, a0, tol=1e-9):
    return abs(x[1]) < tol and abs(x[0] - a0) < tol


def trace_branch(seed: ShootPoint, kind: System, params: Params,
                 opts: ContinuationOptions | None = None,
                 direction=None,
                 integrator: IntegratorOptions | None = None) -> Branch:
    """Trace a solution curve of system ``kind`` starting at ``seed``.

    ``direction`` (a 3-vector) selects the initial orientation; by default the
    branch heads toward increasing ``b``.  If the seed lies on the circular
    line at a bifurcation point and ``escape_trivial`` is set, the first step
    leaves along the non-trivial family.  The termination reason is stored
    in ``branch.metadata["termination"]``.

    Raises
    ------
    SeedRejected
        If the seed cannot be corrected onto the solution set.
    """
    opts = opts or ContinuationOptions()
    kind = System(kind)
    iopts = integrator or BRANCH_INTEGRATOR
    W = np.asarray(opts.weights, dtype=float)
    a0 = derived_constants(params).a0
    rho_min = params.default_rho_min if iopts.rho_min is None else iopts.rho_min
    seed = ShootPoint(*seed)
    meta = {
        "params": asdict(params),
        "kind": kind.value,
        "seed": list(seed),
        "options": _options_dict(opts),
        "integrator": _options_dict(iopts),
    }

    # Correct the seed onto the solution set.
    x = seed.as_array()
    on_trivial = _is_trivial(x, a0)
    try:
        if on_trivial and opts.escape_trivial:
            t = tangent_at(seed, kind, params, direction, opts.bif_angle_threshold, iopts)
        else:
            guess = _orient(_null_vector(evaluate(seed, kind, params, iopts)[1]), direction)
            res = newton_solve(seed, kind, params, guess, x, opts.tol, opts=iopts)
            x = res.point.as_array()
            t = _orient(_null_vector(res.jacobian), direction)
    except (RankDeficient, *_FAILURES) as exc:
        raise SeedRejected(f"seed {seed} rejected: {exc}") from exc

    points = [make_branch_point(ShootPoint.from_array(x), kind, params, t, iopts)]
    if points[0].residual_norm >= opts.tol:
        raise SeedRejected(f"seed residual {points[0].residual_norm:.3e} above tolerance")
    h = opts.h0
    s_total = 0.0
    reason = "max-points"
    last_failure = None
    while len(points) < opts.max_points:
        if s_total >= opts.max_arclength:
            reason = "max-arclength"
            break
        h_step = min(h, opts.max_arclength - s_total)
        xp = x + h_step * t / W
        try:
            sol = newton_solve(ShootPoint.from_array(xp), kind, params, t * W, xp,
                               opts.tol, opts=iopts)
            x_new = sol.point.as_array()
            t_new = _bordered_tangent(sol.jacobian / W, t)
            if t_new @ t < opts.min_tangent_cos:
                raise NoConvergence("tangent turned too sharply")
        except _FAILURES as exc:
            last_failure = exc
            h *= 0.5
            if h < opts.h_min:
                reason = "collision-limit" if isinstance(exc, CollisionError) else "step-underflow"
                break
            continue
        except np.linalg.LinAlgError as exc:
            last_failure = exc
            h *= 0.5
            if h < opts.h_min:
                reason = "rank-deficient"
                break
            continue

        s_total += float(np.linalg.norm((x_new - x) * W))
        x, t = x_new, t_new
        bp = BranchPoint(sol.point, sol.residual, t / W / np.linalg.norm(t / W),
                         _theta(sol.point, params, iopts), sol.jacobian)
        points.append(bp)
        if sol.iterations <= opts.easy_iterations:
            h = min(h * opts.grow, opts.h_max)
        if opts.a_min is not None and x[0] < opts.a_min:
            reason = "a-min"
            break
        if opts.T_max is not None and x[2] > opts.T_max:
            reason = "T-max"
            break
        if opts.stop_on_trivial and len(points) >= 4 and all(_is_trivial(p.x, a0) for p in points[-4:]):
            reason = "trivial-line"
            break
        try:
            closest = _min_pair_distance(sol.point, params, iopts)
        except (CollisionError, StepFailure):
            closest = 0.0
        if closest < opts.collision_factor * rho_min:
            reason = "collision-limit"
            break
    meta["termination"] = reason
    if last_failure is not None:
        meta["last_failure"] = repr(last_failure)
    log.info("branch of %d points terminated: %s", len(points), reason)
    return Branch(kind, points, meta)


def _theta(point, params, iopts):
    _, vs = integrate_variational(point.a, point.b, point.T, params, iopts)
    return vs.base.theta


def _null_vector(J):
    c = np.cross(J[0], J[1])
    n = np.linalg.norm(c)
    if n == 0:
        raise RankDeficient("Jacobian has rank < 2", 0.0)
    return c / n


def _options_dict(opts):
    out = {}
    for k, v in asdict(opts).items():
        if isinstance(v, float) and not np.isfinite(v):
            v = None if np.isnan(v) else ("inf" if v > 0 else "-inf")
        elif isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out


def _options_from_dict(cls, d):
    kw = {}
    for k, v in d.items():
        if v in ("inf", "-inf"):
            v = float(v)
        elif isinstance(v, list):
            v = tuple(v)
        kw[k] = v
    return cls(**kw)


# ---------------------------------------------------------------------------
# Branch geometry helpers


def hermite_samples(branch: Branch, per_segment: int = 16) -> np.ndarray:
    """Dense samples of the cubic Hermite curve through the branch points and tangents."""
    X = branch.coords()
    Tg = np.array([p.tangent for p in branch.points])
    s = np.linspace(0.0, 1.0, per_segment, endpoint=False)
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    out = []
    for i in range(len(X) - 1):
        L = np.linalg.norm(X[i + 1] - X[i])
        seg = (h00[:, None] * X[i] + h10[:, None] * L * Tg[i]
               + h01[:, None] * X[i + 1] + h11[:, None] * L * Tg[i + 1])
        out.append(seg)
    out.append(X[-1:])
    return np.concatenate(out)


def _point_polyline_distance(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Distance from each row of ``P`` to the polyline through the rows of ``Q``."""
    A = Q[:-1]
    D = Q[1:] - A
    L2 = np.maximum(np.sum(D * D, axis=1), 1e-300)
    out = np.empty(len(P))
    for k, p in enumerate(P):
        u = np.clip(np.sum((p - A) * D, axis=1) / L2, 0.0, 1.0)
        out[k] = np.sqrt(np.min(np.sum((A + u[:, None] * D - p) ** 2, axis=1)))
    return out


def distance_to_branch(points, branch: Branch) -> np.ndarray:
    """Distance from each point to the interpolated curve of ``branch``."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if len(branch) == 1:
        return np.linalg.norm(P - branch.coords()[0], axis=1)
    return _point_polyline_distance(P, hermite_samples(branch))


def hausdorff_distance(b1: Branch, b2: Branch) -> float:
    """Symmetric Hausdorff distance between two traces over their common arclength extent."""
    s1, s2 = b1.arclength(), b2.arclength()
    common = min(s1[-1], s2[-1])
    P1 = b1.coords()[s1 <= common]
    P2 = b2.coords()[s2 <= common]
    return float(max(distance_to_branch(P1, b2).max(), distance_to_branch(P2, b1).max()))


def project_onto_branch(branch: Branch, target, tol: float | None = None) -> BranchPoint:
    """Solution point of ``branch`` closest to ``target``.

    The nearest polyline segment supplies the local direction; the point is
    corrected on the hyperplane through ``target`` orthogonal to it.
    """
    target = np.asarray(target, dtype=float)
    X = branch.coords()
    if len(X) < 2:
        raise ValueError("need at least two branch points")
    seg_d = [float(_point_polyline_distance(target[None, :], X[i:i + 2])[0]) for i in range(len(X) - 1)]
    i = int(np.argmin(seg_d))
    if tol is None:
        tol = branch.metadata.get("options", {}).get("tol", 1e-10)
    seg = _Segment(branch.points[i], branch.points[i + 1], branch.kind, branch.params,
                   branch.integrator_options, tol)
    s = float(np.clip((target - seg.p.x) @ seg.u / seg.L, 0.0, 1.0))
    sol = newton_solve(ShootPoint.from_array(seg.guess(s)), branch.kind, branch.params,
                       seg.u, target, tol, opts=branch.integrator_options)
    t = _bordered_tangent(sol.jacobian, seg.u)
    return BranchPoint(sol.point, sol.residual, t,
                       _theta(sol.point, branch.params, branch.integrator_options), sol.jacobian)


# ---------------------------------------------------------------------------
# Bifurcation detection and branch switching


def _indicator(J, t, scale):
    """Signed rank-degeneracy test: ``(r1 x r2) . t`` over the branch-typical row norms.

    It vanishes both when the rows turn parallel and when one row collapses.
    """
    return float(np.cross(J[0], J[1]) @ t / scale)


def _row_scale(branch: Branch) -> float:
    J = np.array([p.jacobian for p in branch.points])
    return float(np.median(np.linalg.norm(J[:, 0], axis=1)) * np.median(np.linalg.norm(J[:, 1], axis=1)))


class _Segment:
    """Points on the branch between two consecutive branch points, parametrised by ``sigma`` in [0, 1]."""

    def __init__(self, p: BranchPoint, q: BranchPoint, kind, params, iopts, tol):
        self.p, self.q = p, q
        self.kind, self.params, self.iopts, self.tol = kind, params, iopts, tol
        self.chord = q.x - p.x
        self.L = float(np.linalg.norm(self.chord))
        self.u = self.chord / self.L

    def guess(self, s):
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return (h00 * self.p.x + h10 * self.L * self.p.tangent
                + h01 * self.q.x + h11 * self.L * self.q.tangent)

    def solve(self, s) -> BranchPoint:
        if s <= 0.0:
            return self.p
        if s >= 1.0:
            return self.q
        anchor = self.p.x + s * self.chord
        sol = newton_solve(ShootPoint.from_array(self.guess(s)), self.kind, self.params,
                           self.u, anchor, self.tol, opts=self.iopts, max_cond=1e16)
        w = (1 - s) * self.p.tangent + s * self.q.tangent
        t = _bordered_tangent(sol.jacobian, w / np.linalg.norm(w))
        return BranchPoint(sol.point, sol.residual, t,
                           _theta(sol.point, self.params, self.iopts), sol.jacobian)


def detect_bifurcations(branch: Branch, threshold: float | None = None,
                        arclength_tol: float = 1e-6, prefilter: float = 10.0) -> list[BranchPoint]:
    """Locate rank-degenerate points in the interior of a traced branch.

    Brackets come from sign changes of the signed degeneracy indicator between
    consecutive points, plus interior local minima of its magnitude below
    ``prefilter * threshold``.  Each bracket is refined along the branch to
    ``arclength_tol``; refined points whose indicator magnitude is below
    ``threshold`` are returned with ``extra["indicator"]`` set.
    """
    if len(branch) < 3:
        return []
    if threshold is None:
        threshold = branch.metadata.get("options", {}).get("bif_angle_threshold", 1e-3)
    params = branch.params
    iopts = branch.integrator_options
    tol = branch.metadata.get("options", {}).get("tol", 1e-10)
    scale = _row_scale(branch)
    pts = branch.points
    tau = np.array([_indicator(p.jacobian, p.tangent, scale) for p in pts])

    found = []
    handled = set()
    for i in range(len(pts) - 1):
        if tau[i] * tau[i + 1] < 0:
            seg = _Segment(pts[i], pts[i + 1], branch.kind, params, iopts, tol)

            def f(s, seg=seg):
                bp = seg.solve(s)
                return _indicator(bp.jacobian, bp.tangent, scale)

            try:
                s_star = brentq(f, 0.0, 1.0, xtol=arclength_tol / seg.L)
                bp = seg.solve(s_star)
            except _FAILURES + (ValueError, np.linalg.LinAlgError) as exc:
                log.warning("refinement of bracket %d failed: %s", i, exc)
                continue
            handled.update((i, i + 1))
            found.append((i, bp))
    for i in range(1, len(pts) - 1):
        if i in handled:
            continue
        a = abs(tau[i])
        if a <= abs(tau[i - 1]) and a <= abs(tau[i + 1]) and a < prefilter * threshold:
            segs = (_Segment(pts[i - 1], pts[i], branch.kind, params, iopts, tol),
                    _Segment(pts[i], pts[i + 1], branch.kind, params, iopts, tol))
            L = segs[0].L + segs[1].L

            def g(u):
                s = u * L
                bp = segs[0].solve(s / segs[0].L) if s < segs[0].L else segs[1].solve((s - segs[0].L) / segs[1].L)
                return abs(_indicator(bp.jacobian, bp.tangent, scale)), bp

            try:
                r = minimize_scalar(lambda u: g(u)[0], bounds=(0.0, 1.0), method="bounded",
                                    options={"xatol": arclength_tol / L})
                bp = g(r.x)[1]
            except _FAILURES + (np.linalg.LinAlgError,) as exc:
                log.warning("refinement of minimum %d failed: %s", i, exc)
                continue
            found.append((i, bp))
    out = []
    for i, bp in sorted(found, key=lambda item: item[0]):
        ind = _indicator(bp.jacobian, bp.tangent, scale)
        if abs(ind) < threshold:
            bp.extra["indicator"] = ind
            bp.extra["index"] = i
            out.append(bp)
    return out


class BranchSeed(NamedTuple):
    point: ShootPoint
    direction: np.ndarray  # initial orientation pointing away from the bifurcation


def switch_branch(candidate: BranchPoint, parent: Branch, params: Params | None = None,
                  opts: ContinuationOptions | None = None, delta: float = 1e-2,
                  eps: float = 1e-3, n_fan: int = 8,
                  integrator: IntegratorOptions | None = None,
                  max_distance: float | None = None, same_cos: float = 0.99) -> list[BranchSeed]:
    """Seeds on the families crossing ``parent`` at ``candidate``.

    Newton solves are started at ``candidate + delta * v`` on the hyperplane
    orthogonal to ``v`` for a fan of directions ``v`` orthogonal to the parent
    tangent (the fan is aligned with the second null direction of the
    Jacobian).  Solutions within ``eps`` of the parent, farther than
    ``max_distance`` (default ``20 * delta``) from the candidate, or leaving
    in the same direction as an earlier seed (cosine above ``same_cos``) are
    discarded.

    Raises
    ------
    NoNewBranch
        If every solve lands on the parent branch (or fails).
    """
    params = params or parent.params
    opts = opts or ContinuationOptions()
    iopts = integrator or parent.integrator_options
    kind = parent.kind
    if max_distance is None:
        max_distance = 20.0 * delta
    x0 = candidate.x
    t = candidate.tangent / np.linalg.norm(candidate.tangent)
    _, J = evaluate(candidate.point, kind, params, iopts)
    _, _, Vt = np.linalg.svd(J)
    # Component of the 2-D approximate null space orthogonal to the tangent.
    basis = Vt[1:]
    proj = basis - np.outer(basis @ t, t)
    u = proj[np.argmax(np.linalg.norm(proj, axis=1))]
    u /= np.linalg.norm(u)
    w = np.cross(t, u)
    seeds: list[BranchSeed] = []
    for k in range(n_fan):
        phi = 2 * np.pi * k / n_fan
        v = np.cos(phi) * u + np.sin(phi) * w
        start = x0 + delta * v
        try:
            sol = newton_solve(ShootPoint.from_array(start), kind, params, v, start,
                               opts.tol, opts=iopts)
        except _FAILURES as exc:
            log.debug("fan direction %d failed: %s", k, exc)
            continue
        xs = sol.point.as_array()
        out = xs - x0
        dist = np.linalg.norm(out)
        if dist > max_distance or distance_to_branch(xs, parent)[0] < eps:
            continue
        if any(out @ s.direction > same_cos * dist * np.linalg.norm(s.direction) for s in seeds):
            continue
        seeds.append(BranchSeed(sol.point, out))
    if not seeds:
        raise NoNewBranch(f"all solves near {candidate.point} returned to the parent branch")
    return seeds


def trace_from_seed(seed: BranchSeed, kind: System, params: Params,
                    opts: ContinuationOptions | None = None,
                    integrator: IntegratorOptions | None = None) -> Branch:
    """Trace a child branch outward from a switching seed."""
    return trace_branch(seed.point, kind, params, opts, direction=seed.direction, integrator=integrator)


# ---------------------------------------------------------------------------
# JSON Lines persistence


def point_record(i: int, bp: BranchPoint) -> dict:
    rec = {
        "i": i,
        "a": bp.point.a,
        "b": bp.point.b,
        "T": bp.point.T,
        "theta0": bp.theta0,
        "res_rt": float(bp.residual[0]),
        "res_d": float(bp.residual[1]),
        "grad_angle_sin": bp.grad_angle_sin,
        "tangent": [float(v) for v in bp.tangent],
        "jacobian": [[float(v) for v in row] for row in bp.jacobian],
    }
    rec.update(bp.extra)
    return rec


def write_branch(branch: Branch, path) -> None:
    """Write a header line with metadata followed by one JSON object per point."""
    with open(path, "w") as fh:
        fh.write(json.dumps({"header": True, **branch.metadata}) + "\n")
        for i, bp in enumerate(branch.points):
            fh.write(json.dumps(point_record(i, bp)) + "\n")


_CORE_KEYS = {"i", "a", "b", "T", "theta0", "res_rt", "res_d", "grad_angle_sin", "tangent", "jacobian"}


def read_branch(path) -> Branch:
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or not lines[0].get("header"):
        raise ValueError(f"{path}: missing branch header line")
    meta = {k: v for k, v in lines[0].items() if k != "header"}
    points = []
    for rec in lines[1:]:
        bp = BranchPoint(ShootPoint(rec["a"], rec["b"], rec["T"]),
                         [rec["res_rt"], rec["res_d"]], rec["tangent"], rec["theta0"],
                         rec["jacobian"])
        bp.extra = {k: v for k, v in rec.items() if k not in _CORE_KEYS}
        points.append(bp)
    return Branch(System(meta["kind"]), points, meta)


def continuation_options(branch: Branch) -> ContinuationOptions:
    return _options_from_dict(ContinuationOptions, branch.metadata.get("options", {}))


def with_options(opts: ContinuationOptions, **changes) -> ContinuationOptions:
    return replace(opts, **changes)
