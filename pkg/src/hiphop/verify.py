"""Full Cartesian 2N-body cross-checks of the reduced dynamics.

A reduced state is embedded by placing body 1 from its cylindrical
coordinates and generating the others with the rotation by ``pi/N`` combined
with the reflection ``z -> -z``.  The full problem (``G = 1``, equal masses)
is then integrated with the same Runge-Kutta kernel as the reduced one.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numba import njit

from .integrate import IntegratorOptions, Trajectory, _opts, integrate, run
from .model import Params, ReducedState
from .shoot import ShootPoint


@dataclass(frozen=True)
class FullState:
    positions: np.ndarray  # (2N, 3)
    velocities: np.ndarray  # (2N, 3)

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        object.__setattr__(self, "velocities", np.asarray(self.velocities, dtype=float))
        if self.positions.shape != self.velocities.shape or self.positions.shape[1:] != (3,):
            raise ValueError("positions and velocities must both have shape (n, 3)")

    @property
    def n_bodies(self) -> int:
        return self.positions.shape[0]

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.positions.ravel(), self.velocities.ravel()])

    @classmethod
    def from_vector(cls, y) -> "FullState":
        y = np.asarray(y, dtype=float)
        n = y.size // 6
        return cls(y[: 3 * n].reshape(n, 3), y[3 * n:].reshape(n, 3))


def symmetry_matrix(N: int) -> np.ndarray:
    """Rotation by ``pi/N`` about the z-axis followed by the reflection ``z -> -z``."""
    c, s = np.cos(np.pi / N), np.sin(np.pi / N)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, -1.0]])


def _body_one(state, a):
    r, rdot, d, ddot, th = (float(v) for v in state[:5])
    c, s = np.cos(th), np.sin(th)
    pos = np.array([r * c, r * s, d])
    vel = np.array([rdot * c - (a / r) * s, rdot * s + (a / r) * c, ddot])
    return pos, vel


def embed(state, a: float, params: Params) -> FullState:
    """Antiprism configuration generated by the reduced ``state`` (with angular momentum ``a``)."""
    if not state[0] > 0:
        raise ValueError(f"r must be positive, got {state[0]!r}")
    pos, vel = _body_one(state, a)
    R = symmetry_matrix(params.N)
    P = np.empty((params.n_bodies, 3))
    V = np.empty((params.n_bodies, 3))
    for j in range(params.n_bodies):
        P[j], V[j] = pos, vel
        pos, vel = R @ pos, R @ vel
    return FullState(P, V)


def embed_point(point: ShootPoint, params: Params) -> FullState:
    """Initial full state of the orbit labelled by ``point``."""
    point = ShootPoint(*point)
    return embed(ReducedState(params.r0, 0.0, 0.0, point.b, 0.0), point.a, params)


def _pack(params: Params, rho_min: float | None) -> np.ndarray:
    if rho_min is None:
        rho_min = params.default_rho_min
    return np.array([params.m, rho_min, float(params.n_bodies)])


@njit(cache=True)
def full_rhs(t, y, p, out):
    m = p[0]
    rho2 = p[1] * p[1]
    n = int(p[2])
    v0 = 3 * n
    for i in range(v0):
        out[i] = y[v0 + i]
        out[v0 + i] = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dx = y[3 * j] - y[3 * i]
            dy = y[3 * j + 1] - y[3 * i + 1]
            dz = y[3 * j + 2] - y[3 * i + 2]
            q = dx * dx + dy * dy + dz * dz
            if q <= rho2:
                return 1
            k = m / (q * np.sqrt(q))
            out[v0 + 3 * i] += k * dx
            out[v0 + 3 * i + 1] += k * dy
            out[v0 + 3 * i + 2] += k * dz
            out[v0 + 3 * j] -= k * dx
            out[v0 + 3 * j + 1] -= k * dy
            out[v0 + 3 * j + 2] -= k * dz
    return 0


def integrate_full(fs: FullState, T: float, params: Params,
                   opts: IntegratorOptions | None = None, dense: bool = False):
    """Integrate the Newtonian problem for time ``T``.

    Returns the final :class:`FullState`, plus the dense :class:`Trajectory`
    over the flat state vector when ``dense`` is true.
    """
    opts = _opts(opts)
    y, traj = run(full_rhs, _pack(params, opts.rho_min), fs.as_vector(), 0.0, T, opts, dense)
    final = FullState.from_vector(y)
    return (final, traj) if dense else final


def total_energy(fs: FullState, params: Params) -> float:
    m = params.m
    kin = 0.5 * m * float(np.sum(fs.velocities**2))
    diff = fs.positions[:, None, :] - fs.positions[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    iu = np.triu_indices(fs.n_bodies, 1)
    return kin - m * m * float(np.sum(1.0 / dist[iu]))


def angular_momentum(fs: FullState, params: Params) -> np.ndarray:
    return params.m * np.cross(fs.positions, fs.velocities).sum(axis=0)


def center_of_mass(fs: FullState) -> np.ndarray:
    return fs.positions.mean(axis=0)


def symmetry_defect(fs: FullState, params: Params) -> float:
    """Largest deviation of body ``j`` from ``R^(j-1)`` applied to body 1."""
    R = symmetry_matrix(params.N)
    p = fs.positions[0]
    worst = 0.0
    for j in range(fs.n_bodies):
        worst = max(worst, float(np.linalg.norm(fs.positions[j] - p)))
        p = R @ p
    return worst


@dataclass(frozen=True)
class Comparison:
    max_deviation: float  # positions, over time and bodies
    energy_drift: float
    angular_momentum_drift: float
    symmetry_defect: float


def compare_reduced_full(point: ShootPoint, params: Params,
                         opts: IntegratorOptions | None = None, span: float = 2.0,
                         initial: FullState | None = None) -> Comparison:
    """Integrate both representations over ``[0, span*T]`` and compare.

    ``initial`` overrides the full-problem starting state (used to show that
    a symmetry-breaking perturbation is detected).
    """
    point = ShootPoint(*point)
    opts = _opts(opts)
    t_end = span * point.T
    red = integrate(point.a, point.b, t_end, params, opts)
    fs0 = embed_point(point, params) if initial is None else initial
    fs1, full = integrate_full(fs0, t_end, params, opts, dense=True)
    # compare at the nodes and interior points of both meshes
    ts = np.union1d(red.ts, full.ts)
    ts = np.union1d(ts, 0.5 * (ts[1:] + ts[:-1]))
    Yr = red(ts)
    Yf = full(ts)
    dev = 0.0
    sym = 0.0
    for k in range(len(ts)):
        ref = embed(Yr[k], point.a, params)
        got = FullState.from_vector(Yf[k])
        dev = max(dev, float(np.max(np.linalg.norm(ref.positions - got.positions, axis=1))))
        sym = max(sym, symmetry_defect(got, params))
    E0, E1 = total_energy(fs0, params), total_energy(fs1, params)
    L0, L1 = angular_momentum(fs0, params), angular_momentum(fs1, params)
    return Comparison(dev, abs(E1 - E0), float(np.linalg.norm(L1 - L0)), sym)


def export_full_csv(traj: Trajectory, path, times=None) -> None:
    """Write rows ``t,body,x,y,z,vx,vy,vz`` (bodies numbered from 1)."""
    ts = traj.ts if times is None else np.asarray(times, dtype=float)
    Y = traj(ts)
    n = Y.shape[1] // 6
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "body", "x", "y", "z", "vx", "vy", "vz"])
        for t, y in zip(ts, Y):
            fs = FullState.from_vector(y)
            for j in range(n):
                w.writerow([f"{t:.17g}", j + 1] + [f"{v:.17g}" for v in (*fs.positions[j], *fs.velocities[j])])
