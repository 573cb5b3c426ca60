"""Shooting residuals for the two symmetry systems and a damped Newton corrector.

System I asks for ``R_t = D_t = 0`` at time ``T`` (double symmetric, period
``4T``); system II asks for ``R_t = D = 0`` at ``T`` (period ``2T``).  Unknowns
are ``x = (a, b, T)``: angular momentum, initial vertical velocity and the
matching time.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import CollisionError, NoConvergence, SingularJacobian, StepFailure
from .integrate import IntegratorOptions, final_state, integrate_variational
from .model import Params, derived_constants, rhs

log = logging.getLogger(__name__)


class ShootPoint(NamedTuple):
    a: float
    b: float
    T: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.T], dtype=float)

    @classmethod
    def from_array(cls, x) -> "ShootPoint":
        return cls(float(x[0]), float(x[1]), float(x[2]))


class System(str, Enum):
    I = "I"
    II = "II"


@dataclass(frozen=True)
class ShootResult:
    point: ShootPoint
    residual: np.ndarray
    jacobian: np.ndarray
    converged: bool
    iterations: int


def trivial_seeds(params: Params) -> tuple[ShootPoint, ShootPoint]:
    """The points ``p0`` (system I) and ``q0`` (system II) on the circular line."""
    dc = derived_constants(params)
    return ShootPoint(dc.a0, 0.0, dc.T0_I), ShootPoint(dc.a0, 0.0, dc.T0_II)


def _check_T(point):
    if not point.T > 0:
        raise ValueError(f"matching time must be positive, got T={point.T!r}")


def residual(point: ShootPoint, kind: System, params: Params,
             opts: IntegratorOptions | None = None, reduced: bool = False) -> np.ndarray:
    """Residual pair of system ``kind`` at ``point``.

    With ``reduced=True`` and system II, the second entry is ``D/b`` so that
    the circular line ``b = 0`` is no longer a root (requires ``b != 0``).
    """
    point = ShootPoint(*point)
    _check_T(point)
    y = final_state(point.a, point.b, point.T, params, opts)
    if System(kind) is System.I:
        return np.array([y[1], y[3]])
    second = y[2]
    if reduced:
        if point.b == 0:
            raise ValueError("reduced residual D/b is undefined at b = 0")
        second = second / point.b
    return np.array([y[1], second])


def evaluate(point: ShootPoint, kind: System, params: Params,
             opts: IntegratorOptions | None = None):
    """Residual and its 2x3 Jacobian with respect to ``(a, b, T)`` from one variational shot."""
    point = ShootPoint(*point)
    _check_T(point)
    _, vs = integrate_variational(point.a, point.b, point.T, params, opts)
    y = np.array(vs.base)
    rho = None if opts is None else opts.rho_min
    dy = rhs(y, point.a, params, rho)
    row_rt = [vs.dRdotda, vs.dRdotdb, dy[1]]
    if System(kind) is System.I:
        res = np.array([y[1], y[3]])
        row2 = [vs.dDdotda, vs.dDdotdb, dy[3]]
    else:
        res = np.array([y[1], y[2]])
        row2 = [vs.dDda, vs.dDdb, dy[2]]
    return res, np.array([row_rt, row2])


def jacobian(point: ShootPoint, kind: System, params: Params,
             opts: IntegratorOptions | None = None) -> np.ndarray:
    return evaluate(point, kind, params, opts)[1]


def fixed_coordinate(index: int, value: float) -> tuple[np.ndarray, np.ndarray]:
    """Constraint pinning coordinate ``index`` (0=a, 1=b, 2=T) to ``value``."""
    normal = np.zeros(3)
    normal[index] = 1.0
    anchor = np.zeros(3)
    anchor[index] = value
    return normal, anchor


def newton_solve(seed: ShootPoint, kind: System, params: Params,
                 normal, anchor=None, tol: float = 1e-10, max_iter: int = 25,
                 opts: IntegratorOptions | None = None,
                 max_cond: float = 1e14, min_damping: float = 2.0**-10,
                 min_T: float = 1e-6) -> ShootResult:
    """Solve the square system ``{residual = 0, <x - anchor, normal> = 0}``.

    Newton's method with Armijo backtracking on the 2-norm (halving down to
    ``min_damping``).  ``anchor`` defaults to the seed.  Iterates with
    ``T < min_T`` are rejected: every ``(a, b, 0)`` is a spurious root.

    Raises
    ------
    NoConvergence
        When ``max_iter`` iterations do not bring the residual below ``tol``.
    SingularJacobian
        When the bordered matrix has condition number above ``max_cond``.
    CollisionError
        When the seed itself runs into a collision.
    """
    x = ShootPoint(*seed).as_array()
    normal = np.asarray(normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    anchor = x.copy() if anchor is None else np.asarray(anchor, dtype=float)

    def full_residual(x, res):
        return np.append(res, normal @ (x - anchor))

    def trial_residual(x):
        if not x[2] >= min_T:
            return None
        try:
            return full_residual(x, residual(ShootPoint.from_array(x), kind, params, opts))
        except (CollisionError, StepFailure):
            return None

    for it in range(max_iter + 1):
        res, J = evaluate(ShootPoint.from_array(x), kind, params, opts)
        F = full_residual(x, res)
        if np.max(np.abs(F)) < tol:
            return ShootResult(ShootPoint.from_array(x), res, J, True, it)
        if it == max_iter:
            break
        A = np.vstack([J, normal])
        cond = np.linalg.cond(A)
        if not cond < max_cond:
            raise SingularJacobian(f"bordered Jacobian condition number {cond:.3e}")
        dx = np.linalg.solve(A, -F)
        fnorm = np.linalg.norm(F)
        lam = 1.0
        while True:
            x_try = x + lam * dx
            F_try = trial_residual(x_try)
            if F_try is not None and np.linalg.norm(F_try) <= (1.0 - 1e-4 * lam) * fnorm:
                break
            lam *= 0.5
            if lam < min_damping:
                # accept the smallest step if it is at least computable
                x_try = x + min_damping * dx
                if trial_residual(x_try) is None:
                    raise NoConvergence(f"line search failed at iteration {it}")
                break
        log.debug("newton it=%d |F|=%.3e lambda=%.3g", it, fnorm, lam)
        x = x_try
    raise NoConvergence(f"no convergence after {max_iter} iterations, |F|={np.max(np.abs(F)):.3e}")
