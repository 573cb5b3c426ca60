"""Adaptive Dormand-Prince 5(4) integration with dense output and event location.

The stepping loop is compiled with numba and takes the right-hand side as a
jitted function ``fun(t, y, p, out) -> status``; the same loop drives the
reduced system, its variational extension and the full Cartesian problem in
:mod:`hiphop.verify`.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numba import njit
from scipy.optimize import brentq

from .errors import CollisionError, DegenerateChannel, StepFailure
from .model import Params, ReducedState, pack_params, reduced_rhs, variational_rhs

# Dormand-Prince tableau and Shampine's quartic dense-output coefficients.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
])
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

OK, COLLISION, UNDERFLOW, BUDGET = 0, 1, 2, 3


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = np.inf
    rho_min: float | None = None  # None: 1e-8 * r0
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


@njit(cache=True)
def _rms(err, y, ynew, rtol, atol):
    acc = 0.0
    for i in range(err.size):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        acc += (err[i] / sc) ** 2
    return np.sqrt(acc / err.size)


@njit(cache=True)
def _dopri5(fun, p, t0, y0, t1, rtol, atol, max_step, dense, max_steps):
    n = y0.size
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    cap = 256 if dense else 1
    ts = np.empty(cap + 1)
    ys = np.empty((cap + 1, n))
    qs = np.empty((cap, n, 4))
    ts[0] = t0
    ys[0] = y0
    y = y0.copy()
    t = t0
    K = np.empty((7, n))
    ytmp = np.empty(n)
    ynew = np.empty(n)
    err = np.empty(n)
    if fun(t, y, p, K[0]) != 0:
        return COLLISION, t, y, 0, ts, ys, qs
    if span == 0.0:
        return OK, t, y, 0, ts, ys, qs

    # Initial step (Hairer, Norsett & Wanner, II.4).
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (K[0, i] / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    for i in range(n):
        ytmp[i] = y[i] + direction * h0 * K[0, i]
    if fun(t + direction * h0, ytmp, p, K[1]) != 0:
        h = h0 * 1e-3
    else:
        d2 = 0.0
        for i in range(n):
            sc = atol + rtol * abs(y[i])
            d2 += ((K[1, i] - K[0, i]) / sc) ** 2
        d2 = np.sqrt(d2 / n) / h0
        dm = max(d1, d2)
        h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
        h = min(100.0 * h0, h1)
    h = min(h, max_step, span)

    nacc = 0
    steps = 0
    last_collision = False
    while True:
        remaining = abs(t1 - t)
        if remaining <= 0.0:
            break
        steps += 1
        if steps > max_steps:
            return BUDGET, t, y, nacc, ts, ys, qs
        final = False
        if h >= remaining:
            h = remaining
            final = True
        if h < 1e-14 * max(1.0, abs(t)):
            code = COLLISION if last_collision else UNDERFLOW
            return code, t, y, nacc, ts, ys, qs
        hs = direction * h
        bad = False
        for s in range(1, 6):
            for i in range(n):
                acc = 0.0
                for j in range(s):
                    acc += _A[s, j] * K[j, i]
                ytmp[i] = y[i] + hs * acc
            if fun(t + _C[s] * hs, ytmp, p, K[s]) != 0:
                bad = True
                break
        if not bad:
            for i in range(n):
                acc = 0.0
                for j in range(6):
                    acc += _B[j] * K[j, i]
                ynew[i] = y[i] + hs * acc
            tnew = t1 if final else t + hs
            if fun(tnew, ynew, p, K[6]) != 0:
                bad = True
        if bad:
            last_collision = True
            h *= 0.25
            continue
        last_collision = False
        for i in range(n):
            acc = 0.0
            for j in range(7):
                acc += _E[j] * K[j, i]
            err[i] = hs * acc
        en = _rms(err, y, ynew, rtol, atol)
        if en > 1.0:
            h *= max(0.2, 0.9 * en ** -0.2)
            continue
        if dense:
            if nacc >= cap:
                cap2 = 2 * cap
                ts2 = np.empty(cap2 + 1)
                ys2 = np.empty((cap2 + 1, n))
                qs2 = np.empty((cap2, n, 4))
                ts2[: nacc + 1] = ts[: nacc + 1]
                ys2[: nacc + 1] = ys[: nacc + 1]
                qs2[:nacc] = qs[:nacc]
                ts, ys, qs, cap = ts2, ys2, qs2, cap2
            for i in range(n):
                for c in range(4):
                    acc = 0.0
                    for j in range(7):
                        acc += K[j, i] * _P[j, c]
                    qs[nacc, i, c] = acc
            ts[nacc + 1] = tnew
            ys[nacc + 1] = ynew
        nacc += 1
        t = tnew
        for i in range(n):
            y[i] = ynew[i]
            K[0, i] = K[6, i]
        fac = 10.0 if en == 0.0 else min(10.0, 0.9 * en ** -0.2)
        h = min(h * fac, max_step)
        if final:
            break
    return OK, t, y, nacc, ts, ys, qs


def run(fun, p, y0, t0, t1, opts: IntegratorOptions, dense: bool):
    """Integrate ``fun`` from ``t0`` to ``t1``; raise on failure.

    Returns the final state and, when ``dense`` is true, a :class:`Trajectory`.
    """
    status, t, y, nacc, ts, ys, qs = _dopri5(
        fun, p, float(t0), np.asarray(y0, dtype=float), float(t1),
        opts.rel_tol, opts.abs_tol, float(opts.max_step), dense, int(opts.max_steps),
    )
    if status == COLLISION:
        raise CollisionError(f"collision near t={t:.12g}")
    if status == UNDERFLOW:
        raise StepFailure(f"step size underflow at t={t:.12g}")
    if status == BUDGET:
        raise StepFailure(f"step budget of {opts.max_steps} exhausted at t={t:.12g}")
    traj = Trajectory(ts[: nacc + 1].copy(), ys[: nacc + 1].copy(), qs[:nacc].copy()) if dense else None
    return y, traj


class Trajectory:
    """Piecewise-quartic dense output over the accepted steps.

    ``ts`` holds the step nodes (monotone in the integration direction), ``ys``
    the accepted states and ``qs`` the interpolation coefficients per step.
    Instances are treated as immutable.
    """

    def __init__(self, ts: np.ndarray, ys: np.ndarray, qs: np.ndarray):
        self.ts = ts
        self.ys = ys
        self.qs = qs
        for arr in (ts, ys, qs):
            arr.setflags(write=False)

    @property
    def t_start(self) -> float:
        return float(self.ts[0])

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    @property
    def dim(self) -> int:
        return self.ys.shape[1]

    def _segment(self, t: np.ndarray) -> np.ndarray:
        forward = self.ts[-1] >= self.ts[0]
        ts = self.ts if forward else self.ts[::-1]
        lo, hi = ts[0], ts[-1]
        span_tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(t < lo - span_tol) or np.any(t > hi + span_tol):
            raise ValueError(f"time outside trajectory span [{lo}, {hi}]")
        idx = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2)
        if not forward:
            idx = len(ts) - 2 - idx
        return idx

    def __call__(self, t):
        """Evaluate the state at time(s) ``t``; shape ``(dim,)`` or ``(len(t), dim)``."""
        scalar = np.ndim(t) == 0
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        if len(self.ts) == 1:
            out = np.repeat(self.ys[:1], tt.size, axis=0)
            return out[0] if scalar else out
        idx = self._segment(tt)
        t_old = self.ts[idx]
        h = self.ts[idx + 1] - t_old
        x = (tt - t_old) / h
        powers = np.stack([x, x * x, x**3, x**4], axis=1)
        out = self.ys[idx] + h[:, None] * np.einsum("kic,kc->ki", self.qs[idx], powers)
        # Nodes reproduce the accepted states exactly.
        at_node = x == 0.0
        out[at_node] = self.ys[idx[at_node]]
        at_end = x == 1.0
        out[at_end] = self.ys[idx[at_end] + 1]
        return out[0] if scalar else out

    def state(self, t: float) -> ReducedState:
        y = self(t)
        return ReducedState(*(float(v) for v in y[:5]))

    def sample(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        t = np.linspace(self.t_start, self.t_end, n)
        return t, self(t)


@dataclass(frozen=True)
class VariationalState:
    """Reduced state at the final time with its sensitivities to ``a`` and ``b``."""

    base: ReducedState
    dRda: float
    dRdotda: float
    dDda: float
    dDdotda: float
    dThda: float
    dRdb: float
    dRdotdb: float
    dDdb: float
    dDdotdb: float
    dThdb: float

    @classmethod
    def from_vector(cls, y: np.ndarray) -> "VariationalState":
        y = [float(v) for v in y]
        return cls(ReducedState(*y[:5]), *y[5:15])

    @property
    def d_da(self) -> np.ndarray:
        """Sensitivity of ``(r, rdot, d, ddot, theta)`` to ``a``."""
        return np.array([self.dRda, self.dRdotda, self.dDda, self.dDdotda, self.dThda])

    @property
    def d_db(self) -> np.ndarray:
        return np.array([self.dRdb, self.dRdotdb, self.dDdb, self.dDdotdb, self.dThdb])


def initial_state(b: float, params: Params) -> np.ndarray:
    return np.array([params.r0, 0.0, 0.0, b, 0.0])


def _opts(opts):
    return IntegratorOptions() if opts is None else opts


def final_state(a, b, T, params: Params, opts: IntegratorOptions | None = None) -> np.ndarray:
    """Reduced state ``(r, rdot, d, ddot, theta)`` at time ``T`` (no dense output)."""
    opts = _opts(opts)
    p = pack_params(a, params, opts.rho_min)
    y, _ = run(reduced_rhs, p, initial_state(b, params), 0.0, T, opts, dense=False)
    return y


def integrate(a, b, T, params: Params, opts: IntegratorOptions | None = None) -> Trajectory:
    """Integrate the reduced system from the standard initial conditions up to ``T``.

    Negative ``T`` integrates backwards in time.
    """
    if T == 0:
        raise ValueError("T must be nonzero")
    opts = _opts(opts)
    p = pack_params(a, params, opts.rho_min)
    _, traj = run(reduced_rhs, p, initial_state(b, params), 0.0, T, opts, dense=True)
    return traj


def continue_trajectory(traj: Trajectory, a, T2, params: Params,
                        opts: IntegratorOptions | None = None) -> Trajectory:
    """Extend a reduced trajectory from its end time to ``T2``."""
    opts = _opts(opts)
    p = pack_params(a, params, opts.rho_min)
    _, ext = run(reduced_rhs, p, traj.ys[-1, :5], traj.t_end, T2, opts, dense=True)
    return Trajectory(
        np.concatenate([traj.ts, ext.ts[1:]]),
        np.concatenate([traj.ys, ext.ys[1:]]),
        np.concatenate([traj.qs, ext.qs]),
    )


def variational_initial_state(b: float, params: Params) -> np.ndarray:
    y0 = np.zeros(15)
    y0[:5] = initial_state(b, params)
    y0[13] = 1.0  # d(ddot)/db at t=0
    return y0


def integrate_variational(a, b, T, params: Params, opts: IntegratorOptions | None = None,
                          dense: bool = False):
    """Integrate the reduced system jointly with its first variational equations.

    Returns ``(trajectory, VariationalState)``; the trajectory is ``None``
    unless ``dense`` is requested, in which case it carries all 15 components.
    """
    opts = _opts(opts)
    p = pack_params(a, params, opts.rho_min)
    y, traj = run(variational_rhs, p, variational_initial_state(b, params), 0.0, T, opts, dense=dense)
    return traj, VariationalState.from_vector(y)


EventKind = Literal["Rt_zero", "D_zero", "Dt_zero"]
_CHANNEL = {"Rt_zero": 1, "D_zero": 2, "Dt_zero": 3}


def locate_event(traj: Trajectory, kind: EventKind, after: float = 0.0,
                 degenerate_atol: float = 1e-13, xtol: float = 1e-13) -> float | None:
    """First time ``t > after`` at which the selected channel changes sign.

    Each step is sampled at its nodes and three interior points before the
    crossing is polished with Brent's method on the dense output.  Returns
    ``None`` if no crossing is found.

    Raises
    ------
    DegenerateChannel
        If the channel is identically (numerically) zero on the trajectory.
    """
    ch = _CHANNEL[kind]
    if np.max(np.abs(traj.ys[:, ch])) <= degenerate_atol:
        raise DegenerateChannel(f"channel {kind} vanishes identically")
    if traj.t_end < traj.t_start:
        raise ValueError("event location requires a forward trajectory")
    nodes = traj.ts[traj.ts > after]
    if nodes.size == 0:
        return None
    grid = [np.array([after])]
    left = after
    for right in nodes:
        grid.append(left + (right - left) * np.array([0.25, 0.5, 0.75, 1.0]))
        left = right
    tt = np.concatenate(grid)
    tt = tt[tt <= traj.t_end]
    vals = traj(tt)[:, ch]

    def g(t):
        return float(traj(t)[ch])

    for i in range(len(tt) - 1):
        if vals[i] == 0.0 and tt[i] > after:
            return float(tt[i])
        if vals[i] * vals[i + 1] < 0.0:
            return float(brentq(g, tt[i], tt[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
    if vals[-1] == 0.0 and tt[-1] > after:
        return float(tt[-1])
    return None


def export_csv(traj: Trajectory, path, times=None) -> None:
    """Write ``t,r,rdot,d,ddot,theta`` rows at full precision."""
    if times is None:
        times = traj.ts
    times = np.asarray(times, dtype=float)
    ys = traj(times)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "r", "rdot", "d", "ddot", "theta"])
        for t, y in zip(times, ys):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in y[:5]])
