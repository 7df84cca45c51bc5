"""Forward simulation of the controlled system and the duality cross-check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import AdjointFlow, gauss_legendre01
from .functional import source_from_samples
from .linalg import expm
from .switching import ControlSchedule

__all__ = ["Trajectory", "integrate_forward", "duality_check", "node_schedule"]


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    terminal_norm: float
    control_cost: float


def _source(grid, f):
    if f is None or callable(f):
        return f
    return source_from_samples(grid, f)


def node_schedule(cs):
    """Schedule built from node samples alone.

    Midpoints are averages of the neighbouring nodes; where the active block
    changes, each half interval keeps the block of its own end node.
    """
    U = cs.stacked()
    t = np.asarray(cs.t, dtype=float)
    N = len(t) - 1
    interval, times, active, values = [], [], [], []
    for k in range(N):
        a, b = t[k], t[k + 1]
        if cs.active[k] == cs.active[k + 1]:
            interval.append(k)
            times.append((a, 0.5 * (a + b), b))
            active.append(cs.active[k])
            values.append((U[k], 0.5 * (U[k] + U[k + 1]), U[k + 1]))
        else:
            m = 0.5 * (a + b)
            interval += [k, k]
            times += [(a, 0.5 * (a + m), m), (m, 0.5 * (m + b), b)]
            active += [cs.active[k], cs.active[k + 1]]
            values += [(U[k],) * 3, (U[k + 1],) * 3]
    return ControlSchedule(np.array(interval, dtype=int), np.array(times, dtype=float),
                           np.array(active, dtype=int), np.array(values, dtype=float))


def _check_grid(grid, cs):
    t = np.asarray(cs.t, dtype=float)
    if len(t) != grid.N + 1 or not np.allclose(t, grid.nodes, rtol=0, atol=1e-12 * grid.T):
        raise ValueError("controls are sampled on a different grid")
    if cs.schedule is not None and len(cs.schedule):
        if cs.schedule.interval.min() < 0 or cs.schedule.interval.max() >= grid.N:
            raise ValueError("control schedule refers to intervals outside the grid")


def _full_pieces(grid, sched):
    t = grid.nodes
    k = sched.interval
    tol = 1e-13 * grid.T
    return ((np.abs(sched.times[:, 0] - t[k]) <= tol)
            & (np.abs(sched.times[:, 2] - t[k + 1]) <= tol))


def integrate_forward(sys, grid, cs, y0, f=None):
    """Exponential integrator ``y[k+1] = expm(-hA) y[k] + Q_k``.

    ``Q_k`` applies Simpson's rule on every schedule piece of interval ``k`` to
    ``expm(-A (t_{k+1} - s)) g(s)`` with ``g = sum_i B_i u_i + f``.
    """
    _check_grid(grid, cs)
    y0 = np.asarray(y0, dtype=float).ravel()
    if y0.shape != (sys.dim,):
        raise ValueError(f"y0 must have length {sys.dim}")
    if cs.block_dims != sys.block_dims:
        raise ValueError("control blocks do not match the system")
    f = _source(grid, f)
    sched = cs.schedule if cs.schedule is not None else node_schedule(cs)
    B = sys.B
    d, N, h = sys.dim, grid.N, grid.h
    g = sched.values @ B.T
    if f is not None:
        g = g + np.asarray(f(sched.times.ravel()), dtype=float).reshape(g.shape)
    width = sched.times[:, 2] - sched.times[:, 0]
    E = expm(-h * sys.A)
    E_half = expm(-0.5 * h * sys.A)
    full = _full_pieces(grid, sched)
    contrib = np.empty((len(sched), d))
    contrib[full] = (g[full, 0] @ E.T + 4.0 * (g[full, 1] @ E_half.T) + g[full, 2])
    t_end = grid.nodes[sched.interval + 1]
    for p in np.nonzero(~full)[0]:
        acc = np.zeros(d)
        for j, c in enumerate((1.0, 4.0, 1.0)):
            acc += c * (expm(-sys.A * (t_end[p] - sched.times[p, j])) @ g[p, j])
        contrib[p] = acc
    contrib *= (width / 6.0)[:, None]
    Q = np.zeros((N, d))
    np.add.at(Q, sched.interval, contrib)
    y = np.empty((N + 1, d))
    y[0] = y0
    for k in range(N):
        y[k + 1] = E @ y[k] + Q[k]
    u2 = np.sum(sched.values ** 2, axis=-1)
    cost = float(np.sum(width / 6.0 * (u2[:, 0] + 4.0 * u2[:, 1] + u2[:, 2])))
    return Trajectory(grid.nodes, y, float(np.linalg.norm(y[-1])), cost)


def _interpolate(sched, s):
    """Quadratic through the three schedule values, at local coordinates ``s``."""
    L = np.stack([2.0 * (s - 0.5) * (s - 1.0), -4.0 * s * (s - 1.0), 2.0 * s * (s - 0.5)])
    return np.einsum("jq,pjm->pqm", L, sched.values)


def duality_check(sys, grid, cs, y0, traj, probes=20, f=None, seed=0, gauss_order=3,
                  flow=None):
    """Largest defect of ``<y(T), z_T> = <y0, z(0)> + int <B u + f, z>`` over
    ``probes`` random unit ``z_T``.

    The integral uses Gauss-Legendre points on every schedule piece, with
    the control given by the quadratic through its three schedule values.
    """
    _check_grid(grid, cs)
    y0 = np.asarray(y0, dtype=float).ravel()
    f = _source(grid, f)
    sched = cs.schedule if cs.schedule is not None else node_schedule(cs)
    rng = np.random.default_rng(seed)
    Zt = rng.standard_normal((sys.dim, probes))
    Zt /= np.linalg.norm(Zt, axis=0)
    if flow is None or flow.grid != grid or flow.gauss_order != gauss_order:
        flow = AdjointFlow(sys, grid, gauss_order)
    c, w = gauss_legendre01(gauss_order)
    a = sched.times[:, 0]
    width = sched.times[:, 2] - a
    pts = a[:, None] + c[None, :] * width[:, None]
    g = _interpolate(sched, c) @ sys.B.T
    if f is not None:
        g = g + np.asarray(f(pts.ravel()), dtype=float).reshape(g.shape)
    # adjoint at the node ending each piece's interval, one column per probe
    k1 = sched.interval + 1
    Znode = np.einsum("kab,bp->kap", flow.Phi[k1], Zt)
    full = _full_pieces(grid, sched)
    Zq = np.empty((len(sched), len(c), sys.dim, probes))
    Zq[full] = np.einsum("jab,kbp->kjap", flow.F, Znode[full])
    t_end = grid.nodes[k1]
    for p in np.nonzero(~full)[0]:
        for j in range(len(c)):
            Zq[p, j] = expm(sys.A.T * (pts[p, j] - t_end[p])) @ Znode[p]
    integral = np.einsum("p,j,pja,pjaq->q", width, w, g, Zq)
    lhs = traj.y[-1] @ Zt
    rhs = y0 @ (flow.Phi[0] @ Zt) + integral
    return float(np.max(np.abs(lhs - rhs)))
