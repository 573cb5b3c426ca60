"""Reduced equations of motion for hip-hop solutions of the equal-mass 2N-body problem.

Body 1 sits at cylindrical coordinates ``(r, theta, d)``; the other ``2N - 1``
bodies are obtained by repeatedly rotating by ``pi/N`` about the z-axis while
flipping the sign of z, so the configuration is always an antiprism.  The
reduced state is ``(r, rdot, d, ddot, theta)`` and ``a = r**2 * thetadot`` is
the (per unit mass) angular momentum of every body.

The module also provides the numba kernels used by :mod:`hiphop.integrate`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import CollisionError

# Relative collision floor: rho_min = COLLISION_FLOOR * r0 unless overridden.
COLLISION_FLOOR = 1e-8


@dataclass(frozen=True)
class Params:
    """Problem constants: bodies per N-gon, mass per body, initial ring radius."""

    N: int = 3
    m: float = 1.0
    r0: float = 2.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N!r}")
        if not self.m > 0:
            raise ValueError(f"mass must be positive, got {self.m!r}")
        if not self.r0 > 0:
            raise ValueError(f"r0 must be positive, got {self.r0!r}")

    @property
    def n_bodies(self) -> int:
        return 2 * self.N

    @property
    def default_rho_min(self) -> float:
        return COLLISION_FLOOR * self.r0


@dataclass(frozen=True)
class DerivedConstants:
    alpha_N: float
    gamma_N: float
    a0: float
    T0_I: float
    T0_II: float
    omega: float  # radial frequency of the linearisation about the circular solution
    w: float  # vertical frequency of the same linearisation


class ReducedState(NamedTuple):
    r: float
    rdot: float
    d: float
    ddot: float
    theta: float = 0.0


def ring_coefficients(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``sin^2(k pi / 2N)`` and ``((-1)^k - 1)^2`` for ``k = 1 .. 2N-1``."""
    k = np.arange(1, 2 * N)
    s2 = np.sin(k * np.pi / (2 * N)) ** 2
    c2 = np.where(k % 2 == 1, 4.0, 0.0)
    return s2, c2


def derived_constants(params: Params) -> DerivedConstants:
    N, m, r0 = params.N, params.m, params.r0
    k = np.arange(1, 2 * N)
    s = np.sin(k * np.pi / (2 * N))
    c2 = np.where(k % 2 == 1, 4.0, 0.0)
    alpha = float(np.sum(c2 / s**3)) / 16.0
    gamma = float(np.sum(1.0 / s)) / 4.0
    T0_I = 0.5 * np.pi * np.sqrt(r0**3 / (m * alpha))
    return DerivedConstants(
        alpha_N=alpha,
        gamma_N=gamma,
        a0=float(np.sqrt(m * gamma * r0)),
        T0_I=float(T0_I),
        T0_II=float(2.0 * T0_I),
        omega=float(np.sqrt(m * gamma / r0**3)),
        w=float(np.sqrt(m * alpha / r0**3)),
    )


def _check_distances(r, d, s2, c2, rho_min):
    if r <= 0.0:
        raise CollisionError(f"radial distance r={r!r} is not positive")
    q = 4.0 * r * r * s2 + c2 * d * d
    closest = float(np.sqrt(q.min()))
    if closest <= rho_min:
        raise CollisionError(f"pairwise distance {closest:.3e} below floor {rho_min:.3e}")
    return q


def force_sums(r: float, d: float, N: int, rho_min: float = 0.0) -> tuple[float, float]:
    """Evaluate the interaction sums ``f(r, d)`` and ``g(r, d)``.

    ``f`` weights each neighbour by ``sin^2(k pi/2N)`` and drives the radial
    acceleration; ``g`` only involves the bodies of the opposite N-gon and
    drives the vertical one.

    Raises
    ------
    CollisionError
        If ``r <= 0`` or some pairwise distance is at most ``rho_min``.
    """
    s2, c2 = ring_coefficients(N)
    q = _check_distances(r, d, s2, c2, rho_min)
    q32 = q * np.sqrt(q)
    return float(np.sum(s2 / q32)), float(np.sum(c2 / q32))


def rhs(state, a: float, params: Params, rho_min: float | None = None) -> np.ndarray:
    """Time derivative ``(rdot, rddot, ddot, dddot, thetadot)`` of a reduced state."""
    r, rdot, d, ddot = state[0], state[1], state[2], state[3]
    if rho_min is None:
        rho_min = params.default_rho_min
    f, g = force_sums(r, d, params.N, rho_min)
    m = params.m
    return np.array([
        rdot,
        a * a / r**3 - 2.0 * r * m * f,
        ddot,
        -0.5 * m * d * g,
        a / (r * r),
    ])


def potential(r: float, d: float, params: Params, rho_min: float = 0.0) -> float:
    """Per-body potential whose negative gradient gives the reduced forces."""
    s2, c2 = ring_coefficients(params.N)
    q = _check_distances(r, d, s2, c2, rho_min)
    return -0.5 * params.m * float(np.sum(1.0 / np.sqrt(q)))


def energy(state, a: float, params: Params, rho_min: float = 0.0) -> float:
    """First integral of the reduced system (kinetic + centrifugal + potential)."""
    r, rdot, d, ddot = state[0], state[1], state[2], state[3]
    return 0.5 * (rdot**2 + ddot**2) + a * a / (2.0 * r * r) + potential(r, d, params, rho_min)


class LinearizedOracles(NamedTuple):
    Db: np.ndarray
    Dbt: np.ndarray
    Ra: np.ndarray
    Rat: np.ndarray
    Rb: np.ndarray


def linearized_oracles(params: Params, t) -> LinearizedOracles:
    """Closed-form flow sensitivities along the circular solution ``(a0, 0, t)``.

    ``Db``/``Dbt`` are ``dD/db`` and its time derivative, ``Ra``/``Rat`` are
    ``dR/da`` and its time derivative, and ``Rb = dR/db`` vanishes identically.
    Accepts scalar or array ``t``.
    """
    dc = derived_constants(params)
    t = np.asarray(t, dtype=float)
    w, om, r0 = dc.w, dc.omega, params.r0
    return LinearizedOracles(
        Db=np.sin(w * t) / w,
        Dbt=np.cos(w * t),
        Ra=2.0 / (om * r0) * (1.0 - np.cos(om * t)),
        Rat=2.0 / r0 * np.sin(om * t),
        Rb=np.zeros_like(t),
    )


# ---------------------------------------------------------------------------
# numba kernels
#
# Parameter vector layout: [a, m, rho_min, K, s2[0..K), c2[0..K)] with K = 2N-1.
# Kernels return 0 on success and 1 on collision.


def pack_params(a: float, params: Params, rho_min: float | None = None) -> np.ndarray:
    if rho_min is None:
        rho_min = params.default_rho_min
    s2, c2 = ring_coefficients(params.N)
    head = np.array([a, params.m, rho_min, float(s2.size)])
    return np.concatenate([head, s2, c2])


@njit(cache=True)
def _sums(r, d, p, want_derivs):
    """Return f, g and (optionally) their partial derivatives, or status -1 on collision."""
    K = int(p[3])
    rho2 = p[2] * p[2]
    f = 0.0
    g = 0.0
    fr = 0.0
    fd = 0.0
    gr = 0.0
    gd = 0.0
    if r <= 0.0:
        return -1, f, g, fr, fd, gr, gd
    for k in range(K):
        s2 = p[4 + k]
        c2 = p[4 + K + k]
        q = 4.0 * r * r * s2 + c2 * d * d
        if q <= rho2:
            return -1, f, g, fr, fd, gr, gd
        sq = np.sqrt(q)
        iq32 = 1.0 / (q * sq)
        f += s2 * iq32
        g += c2 * iq32
        if want_derivs:
            iq52 = iq32 / q
            fr += s2 * s2 * iq52
            fd += s2 * c2 * iq52
            gd += c2 * c2 * iq52
    if want_derivs:
        gr = -12.0 * r * fd
        fd = -3.0 * d * fd
        fr = -12.0 * r * fr
        gd = -3.0 * d * gd
    return 0, f, g, fr, fd, gr, gd


@njit(cache=True)
def reduced_rhs(t, y, p, out):
    a = p[0]
    m = p[1]
    r = y[0]
    d = y[2]
    st, f, g, fr, fd, gr, gd = _sums(r, d, p, False)
    if st != 0:
        return 1
    out[0] = y[1]
    out[1] = a * a / (r * r * r) - 2.0 * r * m * f
    out[2] = y[3]
    out[3] = -0.5 * m * d * g
    out[4] = a / (r * r)
    return 0


@njit(cache=True)
def variational_rhs(t, y, p, out):
    """Base state (5) followed by its a-sensitivities (5) and b-sensitivities (5)."""
    a = p[0]
    m = p[1]
    r = y[0]
    d = y[2]
    st, f, g, fr, fd, gr, gd = _sums(r, d, p, True)
    if st != 0:
        return 1
    r3 = r * r * r
    out[0] = y[1]
    out[1] = a * a / r3 - 2.0 * r * m * f
    out[2] = y[3]
    out[3] = -0.5 * m * d * g
    out[4] = a / (r * r)
    F_r = -3.0 * a * a / (r3 * r) - 2.0 * m * (f + r * fr)
    F_d = -2.0 * r * m * fd
    F_a = 2.0 * a / r3
    G_r = -0.5 * m * d * gr
    G_d = -0.5 * m * (g + d * gd)
    for j in range(2):
        o = 5 + 5 * j
        xr = y[o]
        xd = y[o + 2]
        out[o] = y[o + 1]
        out[o + 1] = F_r * xr + F_d * xd
        out[o + 2] = y[o + 3]
        out[o + 3] = G_r * xr + G_d * xd
        out[o + 4] = -2.0 * a * xr / r3
    out[6] += F_a
    out[9] += 1.0 / (r * r)
    return 0
