"""Active-channel partition of an adjoint trace and the switching controls it induces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import expm

__all__ = [
    "ActivePartition",
    "ControlSchedule",
    "SwitchingControlSet",
    "channel_energies",
    "tie_mask",
    "classify",
    "extract_controls",
    "validate_switching",
    "control_schedule",
]

DEFAULT_TIE_TOL = 1e-9


@dataclass(frozen=True)
class ActivePartition:
    """Index of the dominant channel at every grid node.

    ``scale[k]`` is the running maximum of the dominant energy up to node ``k``;
    node ``k`` is a tie when the two largest energies differ by at most
    ``tie_tol * scale[k]``.  ``degenerate`` marks an identically zero trace.
    """

    active: np.ndarray
    tie_mask: np.ndarray
    scale: np.ndarray
    degenerate: bool = False

    @property
    def tie_fraction(self):
        return float(np.mean(self.tie_mask)) if self.tie_mask.size else 0.0

    @property
    def switch_count(self):
        return int(np.count_nonzero(np.diff(self.active)))


def channel_energies(eta, alpha):
    """``alpha_i(t_k) |eta_i[k]|^2`` as an ``(N+1, n)`` array."""
    cols = [np.sum(np.asarray(e, dtype=float) ** 2, axis=-1) for e in eta]
    return np.asarray(alpha) * np.stack(cols, axis=-1)


def tie_mask(q, tie_tol=DEFAULT_TIE_TOL):
    """Tie flags and running-maximum scale for node energies ``q`` of shape ``(K, n)``."""
    q = np.asarray(q, dtype=float)
    top = q.max(axis=-1)
    scale = np.maximum.accumulate(top) if top.size else top
    if q.shape[-1] < 2:
        return scale <= 0, scale
    part = np.partition(q, -2, axis=-1)
    gap = part[:, -1] - part[:, -2]
    return gap <= tie_tol * scale, scale


def classify(trace, weights, tie_tol=DEFAULT_TIE_TOL):
    """Dominant channel per node, ties going to the smallest index."""
    if tie_tol < 0:
        raise ValueError("tie_tol must be nonnegative")
    if len(trace.eta) != weights.n:
        raise ValueError("trace and weights disagree on the number of channels")
    q = channel_energies(trace.eta, weights.alpha(trace.t))
    active = np.argmax(q, axis=-1)
    ties, scale = tie_mask(q, tie_tol)
    degenerate = not np.any(q)
    if degenerate:
        ties = np.ones_like(ties, dtype=bool)
    return ActivePartition(active, ties, scale, degenerate)


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise description of the controls between grid nodes.

    Every grid interval is cut at the switching instants inside it.  Piece
    ``p`` lives in interval ``interval[p]`` over ``[times[p, 0], times[p, 2]]``
    with midpoint ``times[p, 1]``; ``values[p, j]`` holds the stacked control
    ``(u_1, ..., u_n)`` at ``times[p, j]`` taken as a one-sided limit from
    inside the piece.  Only block ``active[p]`` is nonzero on the piece.
    """

    interval: np.ndarray
    times: np.ndarray
    active: np.ndarray
    values: np.ndarray

    def __len__(self):
        return len(self.interval)

    def by_interval(self, N):
        """Start offsets so that pieces of interval ``k`` are ``start[k]:start[k+1]``."""
        return np.searchsorted(self.interval, np.arange(N + 1))


@dataclass(frozen=True)
class SwitchingControlSet:
    """Switching controls sampled at the grid nodes, plus the optional schedule."""

    t: np.ndarray
    controls: tuple
    active: np.ndarray
    tie_fraction: float
    omegas: tuple
    schedule: ControlSchedule | None = None
    degenerate: bool = False

    @property
    def n_blocks(self):
        return len(self.controls)

    @property
    def block_dims(self):
        return tuple(u.shape[1] for u in self.controls)

    @property
    def switch_count(self):
        return int(np.count_nonzero(np.diff(self.active)))

    def stacked(self):
        return np.hstack(self.controls)


def extract_controls(partition, trace, weights, schedule=None):
    """``u_i[k] = alpha_i(t_k) eta_i[k]`` on nodes where ``i`` is active, else 0."""
    if len(partition.active) != len(trace.t):
        raise ValueError("partition and trace live on different grids")
    alpha = weights.alpha(trace.t)
    controls = []
    for i, eta in enumerate(trace.eta):
        on = (partition.active == i) & (not partition.degenerate)
        u = np.where(on[:, None], alpha[:, i:i + 1] * eta, 0.0)
        controls.append(u)
    if partition.degenerate and schedule is not None:
        schedule = ControlSchedule(schedule.interval, schedule.times, schedule.active,
                                   np.zeros_like(schedule.values))
    return SwitchingControlSet(np.asarray(trace.t), tuple(controls), partition.active,
                               partition.tie_fraction, tuple(weights.omegas), schedule,
                               partition.degenerate)


def _nonzero_blocks(U, dims):
    edges = np.concatenate([[0], np.cumsum(dims)])
    nz = [np.any(U[..., a:b] != 0, axis=-1) for a, b in zip(edges[:-1], edges[1:])]
    return np.sum(np.stack(nz, axis=-1), axis=-1)


def validate_switching(cs):
    """True iff at most one control block is nonzero at every node and on
    every schedule piece."""
    if cs.n_blocks == 0:
        return True
    if np.any(_nonzero_blocks(cs.stacked(), cs.block_dims) > 1):
        return False
    if cs.schedule is not None and len(cs.schedule):
        if np.any(_nonzero_blocks(cs.schedule.values, cs.block_dims) > 1):
            return False
    return True


def _law(system, weights, t, z, act):
    """Stacked control ``alpha_a(t) B_a^T z`` with only block ``a`` filled."""
    dims = system.block_dims
    edges = np.concatenate([[0], np.cumsum(dims)])
    out = np.zeros(np.shape(t) + (edges[-1],))
    alpha = weights.alpha(np.asarray(t))
    for i, B in enumerate(system.blocks):
        sel = act == i
        if np.any(sel):
            out[sel, edges[i]:edges[i + 1]] = alpha[sel, i:i + 1] * (z[sel] @ B)
    return out


def control_schedule(obj, res):
    """Schedule of the control law extracted from a resolved terminal state.

    ``obj`` is the functional the minimiser was computed for and ``res`` its
    resolution at the minimiser; regular intervals become one piece, and the
    intervals containing switching instants are cut at those instants.
    """
    system, grid, weights = obj.system, obj.grid, obj.weights
    N, h = grid.N, grid.h
    t = grid.nodes
    Z = res.Z
    At = system.A.T
    E_half = expm(-0.5 * h * At)
    regular = np.asarray(res.smooth[:N], dtype=bool)
    if obj.quadrature == "nodal":
        # the nodal rule keeps node-assigned channels on each half interval
        regular = res.node_active[:-1] == res.node_active[1:]
    ks = np.nonzero(regular)[0]
    interval = [ks]
    times = [np.stack([t[ks], t[ks] + 0.5 * h, t[ks + 1]], axis=1)]
    active = [res.node_active[ks]]
    zs = [np.stack([Z[ks], Z[ks + 1] @ E_half.T, Z[ks + 1]], axis=1)]
    for k in np.nonzero(~regular)[0]:
        if k in res.pieces:
            pieces = res.pieces[k]
        else:
            mid = t[k] + 0.5 * h
            pieces = [(t[k], mid, int(res.node_active[k])),
                      (mid, t[k + 1], int(res.node_active[k + 1]))]
        for a, b, act in pieces:
            tk = np.array([a, 0.5 * (a + b), b])
            interval.append([k])
            times.append(tk[None])
            active.append([act])
            zs.append(np.stack([expm(At * (s - t[k + 1])) @ Z[k + 1] for s in tk])[None])
    interval = np.concatenate(interval).astype(int)
    times = np.concatenate(times)
    active = np.concatenate(active).astype(int)
    zs = np.concatenate(zs)
    order = np.lexsort((times[:, 0], interval))
    interval, times, active, zs = interval[order], times[order], active[order], zs[order]
    values = _law(system, weights, times, zs, np.broadcast_to(active[:, None], times.shape))
    return ControlSchedule(interval, times, active, values)
