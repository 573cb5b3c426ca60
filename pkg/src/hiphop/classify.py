"""Rotation-angle bookkeeping: which body does body 1 reach after ``k`` half periods.

After one matching time ``T`` a system-II orbit is rotated by ``theta0`` and
flipped in ``z``.  Body 1 lands on the initial state of body ``1 + j`` after
``k`` half periods when ``k * theta0 = j * pi/N + 2 pi l`` with ``k + j`` even,
and the bodies then split into ``gcd(j, 2N)`` distinct trajectories.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Literal

import numpy as np

from .continuation import Branch
from .errors import DegenerateChannel, NoBracket, NoConvergence, NotAPeriodicPoint
from .integrate import IntegratorOptions, integrate, integrate_variational, locate_event
from .model import Params, rhs
from .shoot import ShootPoint, System, residual
from .verify import embed, embed_point, integrate_full

ParityMode = Literal["both-parities", "even-j-only"]


class Symmetry(str, Enum):
    DOUBLE = "Double"
    SINGLE = "Single"


class Criterion(str, Enum):
    HOLDS = "CriterionHolds"
    FAILS = "CriterionFails"


@dataclass(frozen=True)
class RationalMatch:
    k0: int
    j0: int
    l: int
    defect: float

    def arrival_body(self, N: int) -> int:
        """Label (1-based) of the body whose initial state body 1 reaches after ``k0`` half periods."""
        return 1 + self.j0 % (2 * N)


@dataclass(frozen=True)
class TrajectoryReport:
    symmetry: Symmetry
    match: RationalMatch | None
    count: int | None  # None: no match within k_max
    theta0: float

    @property
    def choreography(self) -> bool:
        return self.count == 1

    def as_record(self) -> dict:
        m = self.match
        return {
            "symmetry": self.symmetry.value,
            "k0": None if m is None else m.k0,
            "j0": None if m is None else m.j0,
            "l": None if m is None else m.l,
            "defect": None if m is None else m.defect,
            "count": self.count,
            "choreography": self.choreography,
        }


def _require_solution(point, kind, params, opts, tol):
    res = residual(point, kind, params, opts)
    if not np.max(np.abs(res)) <= tol:
        raise NotAPeriodicPoint(f"{point} misses system {System(kind).value} by {np.max(np.abs(res)):.3e}")


def theta_half_period(point: ShootPoint, params: Params, kind: System = System.II,
                      opts: IntegratorOptions | None = None, tol: float = 1e-6) -> float:
    """Rotation angle accumulated by body 1 over the matching time."""
    point = ShootPoint(*point)
    _require_solution(point, kind, params, opts, tol)
    return float(integrate(point.a, point.b, point.T, params, opts).ys[-1, 4])


def rational_match(theta0: float, N: int, k_max: int = 40, tol: float = 1e-3,
                   parity_mode: ParityMode = "both-parities") -> RationalMatch | None:
    """Smallest ``k0`` (then smallest ``j0`` in ``1..2N``) solving the integer matching equation.

    ``l`` is fixed by requiring ``j0`` in ``1..2N``.  Returns None when no
    ``k <= k_max`` matches within ``tol`` radians.
    """
    if not theta0 > 0:
        raise ValueError("theta0 must be positive")
    if k_max < 1 or not tol > 0:
        raise ValueError("need k_max >= 1 and tol > 0")
    if parity_mode not in ("both-parities", "even-j-only"):
        raise ValueError(f"unknown parity mode {parity_mode!r}")
    unit = math.pi / N
    period = 2 * N
    for k in range(1, k_max + 1):
        x = k * theta0 / unit
        best = None
        for n in range(math.floor(x - tol / unit), math.ceil(x + tol / unit) + 1):
            defect = abs(k * theta0 - n * unit)
            if defect > tol:
                continue
            j = n % period or period
            if (k + j) % 2 or (parity_mode == "even-j-only" and j % 2):
                continue
            cand = RationalMatch(k, j, (n - j) // period, defect)
            if best is None or (cand.j0, cand.defect) < (best.j0, best.defect):
                best = cand
        if best is not None:
            return best
    return None


def trajectory_count(match: RationalMatch, N: int) -> int:
    """Number of distinct curves traced by the 2N bodies."""
    return math.gcd(match.j0, 2 * N)


def symmetry_class(point: ShootPoint, params: Params, tol: float = 1e-6,
                   opts: IntegratorOptions | None = None) -> Symmetry:
    """Double when the half-time point ``(a, b, T/2)`` also solves system I."""
    point = ShootPoint(*point)
    _require_solution(point, System.II, params, opts, tol)
    half = residual(ShootPoint(point.a, point.b, 0.5 * point.T), System.I, params, opts)
    return Symmetry.DOUBLE if np.max(np.abs(half)) < tol else Symmetry.SINGLE


def classify_point(point: ShootPoint, params: Params, k_max: int = 40, tol: float = 1e-3,
                   parity_mode: ParityMode | None = None, sym_tol: float = 1e-6,
                   opts: IntegratorOptions | None = None) -> TrajectoryReport:
    """Symmetry class, rational match and trajectory count of a system-II point.

    By default single-symmetry points are matched with even ``j`` only.
    """
    sym = symmetry_class(point, params, sym_tol, opts)
    theta0 = theta_half_period(point, params, opts=opts, tol=sym_tol)
    if parity_mode is None:
        parity_mode = "even-j-only" if sym is Symmetry.SINGLE else "both-parities"
    match = rational_match(theta0, params.N, k_max, tol, parity_mode)
    count = None if match is None else trajectory_count(match, params.N)
    return TrajectoryReport(sym, match, count, theta0)


def _angle_newton(x, target, params, opts, tol, max_iter):
    for it in range(max_iter + 1):
        pt = ShootPoint.from_array(x)
        _, vs = integrate_variational(pt.a, pt.b, pt.T, params, opts)
        y = np.array(vs.base)
        dy = rhs(y, pt.a, params, None if opts is None else opts.rho_min)
        F = np.array([y[1], y[2], y[4] - target])
        if np.max(np.abs(F)) < tol:
            return pt
        J = np.array([
            [vs.dRdotda, vs.dRdotdb, dy[1]],
            [vs.dDda, vs.dDdb, dy[2]],
            [vs.dThda, vs.dThdb, dy[4]],
        ])
        dx = np.linalg.solve(J, -F)
        # keep the correction comparable to the seed spacing
        scale = np.linalg.norm(dx)
        if scale > 0.1:
            dx *= 0.1 / scale
        x = x + dx
    raise NoConvergence(f"angle targeting did not converge, |F|={np.max(np.abs(F)):.3e}")


def choreography_refine(branch: Branch, target: float, params: Params | None = None,
                        tol: float = 1e-10, max_iter: int = 30,
                        opts: IntegratorOptions | None = None,
                        occurrence: int = 0) -> ShootPoint:
    """Point of the branch whose rotation angle equals ``target``.

    The bracket is the ``occurrence``-th sign change of ``theta0 - target``
    along the branch; Newton on ``(R_t, D, Theta - target)`` is started from
    the linear interpolation of its end points.

    Raises
    ------
    NoBracket
        If the branch does not cross ``target`` (that many times).
    """
    params = params or branch.params
    if opts is None:
        opts = branch.integrator_options
    th = np.array([p.theta0 for p in branch.points]) - target
    idx = np.nonzero(th[:-1] * th[1:] <= 0)[0]
    idx = [i for i in idx if not (th[i] == 0 and i > 0 and th[i - 1] * th[i + 1] > 0)]
    if len(idx) <= occurrence:
        raise NoBracket(f"branch does not bracket theta0 = {target:.6g}")
    i = idx[occurrence]
    w = 0.0 if th[i] == th[i + 1] else th[i] / (th[i] - th[i + 1])
    x0 = (1 - w) * branch.points[i].x + w * branch.points[i + 1].x
    return _angle_newton(x0, target, params, opts, tol, max_iter)


def bracket_count(branch: Branch, target: float) -> int:
    th = np.array([p.theta0 for p in branch.points]) - target
    return int(np.count_nonzero(th[:-1] * th[1:] < 0))


def non_choreography_check(point: ShootPoint, params: Params, tol: float = 1e-6,
                           opts: IntegratorOptions | None = None) -> Criterion:
    """Sufficient test that a single-symmetry orbit is not a choreography.

    Holds when ``d`` vanishes on ``[0, 2T)`` only at ``t = 0`` and ``t = T``
    (within ``tol``) and ``r(T)`` differs from ``r(0)`` by more than ``tol``.
    """
    point = ShootPoint(*point)
    _require_solution(point, System.II, params, opts, tol)
    traj = integrate(point.a, point.b, 2 * point.T, params, opts)
    try:
        after = tol
        while True:
            t = locate_event(traj, "D_zero", after=after)
            if t is None or t >= 2 * point.T - tol:
                break
            if abs(t - point.T) > tol:
                return Criterion.FAILS
            after = max(t, after) + tol
    except DegenerateChannel:
        return Criterion.FAILS
    r_T = traj(point.T)[0]
    return Criterion.HOLDS if abs(r_T - params.r0) > tol else Criterion.FAILS


def arrival_defect(point: ShootPoint, match: RationalMatch, params: Params,
                   opts: IntegratorOptions | None = None, method: str = "full") -> float:
    """Distance between body 1 after ``k0`` half periods and the initial state of its arrival body.

    Position and velocity are combined in one 6-vector norm.  ``method="full"``
    integrates the Cartesian problem; orbits that are unstable off the
    antiprism subspace drift out of it over long spans, in which case
    ``method="reduced"`` embeds the reduced flow instead.
    """
    point = ShootPoint(*point)
    fs0 = embed_point(point, params)
    if method == "full":
        fs1 = integrate_full(fs0, match.k0 * point.T, params, opts)
    elif method == "reduced":
        y = integrate(point.a, point.b, match.k0 * point.T, params, opts).ys[-1]
        fs1 = embed(y, point.a, params)
    else:
        raise ValueError(f"unknown method {method!r}")
    j = match.arrival_body(params.N) - 1
    got = np.concatenate([fs1.positions[0], fs1.velocities[0]])
    want = np.concatenate([fs0.positions[j], fs0.velocities[j]])
    return float(np.linalg.norm(got - want))
