"""Backward propagation of the adjoint equation ``-z' + A^T z = 0, z(T) = z_T``."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .linalg import expm

__all__ = [
    "TimeGrid",
    "AdjointTrace",
    "propagate_adjoint",
    "propagator_stack",
    "AdjointFlow",
    "gauss_legendre01",
]

DEFAULT_N = 2000


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k T / N`` with composite Simpson weights.

    An odd ``N`` is rounded up to the next even integer.
    """

    T: float
    N: int = DEFAULT_N

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        N = int(self.N)
        if N < 2:
            raise ValueError("grid needs N >= 2")
        if N % 2:
            N += 1
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "N", N)

    @property
    def h(self):
        return self.T / self.N

    @cached_property
    def nodes(self):
        t = np.arange(self.N + 1) * (self.T / self.N)
        t[-1] = self.T
        return t

    @cached_property
    def weights(self):
        w = np.ones(self.N + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * (self.h / 3.0)


@dataclass(frozen=True)
class AdjointTrace:
    """Samples ``z(t_k)`` and observations ``eta_i[k] = B_i^T z(t_k)``."""

    t: np.ndarray
    Z: np.ndarray
    eta: tuple

    @property
    def n_blocks(self):
        return len(self.eta)


def _traces(sys, Z):
    return tuple(Z @ B for B in sys.blocks)


def _check_terminal(sys, z_T):
    z_T = np.asarray(z_T, dtype=float).ravel()
    if z_T.shape != (sys.dim,):
        raise ValueError(f"terminal state must have length {sys.dim}, got {z_T.shape}")
    if not np.all(np.isfinite(z_T)):
        raise ValueError("terminal state has non-finite entries")
    return z_T


def propagate_adjoint(sys, grid, z_T):
    """Exact flow on the grid: ``Z[k] = E^{N-k} z_T`` with ``E = expm(-h A^T)``."""
    z_T = _check_terminal(sys, z_T)
    E = expm(-grid.h * sys.A.T)
    Z = np.empty((grid.N + 1, sys.dim))
    Z[-1] = z_T
    for k in range(grid.N - 1, -1, -1):
        Z[k] = E @ Z[k + 1]
    return AdjointTrace(grid.nodes, Z, _traces(sys, Z))


def propagator_stack(sys, grid):
    """``Phi_k = expm(A^T (t_k - T))`` for ``k = 0..N`` as an ``(N+1, d, d)`` array."""
    d = sys.dim
    E = expm(-grid.h * sys.A.T)
    Phi = np.empty((grid.N + 1, d, d))
    Phi[-1] = np.eye(d)
    for k in range(grid.N - 1, -1, -1):
        Phi[k] = E @ Phi[k + 1]
    return Phi


def gauss_legendre01(m):
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


class AdjointFlow:
    """Propagators of one system on one grid, cached for repeated use.

    Besides the node propagators, the flow holds ``F_j = expm(-(1 - c_j) h A^T)``
    for the Gauss-Legendre abscissae ``c_j`` of each grid interval, so that
    ``z(t_k + c_j h) = F_j z(t_{k+1})``.
    """

    def __init__(self, sys, grid, gauss_order=3):
        self.sys = sys
        self.grid = grid
        self.gauss_order = gauss_order
        self.c, self.w = gauss_legendre01(gauss_order)
        At = sys.A.T
        h = grid.h
        self.E = expm(-h * At)
        self.Phi = propagator_stack(sys, grid)
        self.F = np.stack([expm(-(1.0 - c) * h * At) for c in self.c])
        # forward-direction kernels for the state equation
        self.E_fwd = expm(-h * sys.A)
        self.E_fwd_half = expm(-0.5 * h * sys.A)

    @cached_property
    def gauss_times(self):
        t = self.grid.nodes[:-1]
        return t[:, None] + self.c[None, :] * self.grid.h

    def states(self, z_T):
        return self.Phi @ z_T

    def gauss_states(self, Z):
        """``(N, m, d)`` adjoint states at the interior Gauss points."""
        return np.einsum("jab,kb->kja", self.F, Z[1:])

    def local_propagator(self, t, k):
        """``expm(A^T (t - t_{k+1}))``, mapping ``z(t_{k+1})`` to ``z(t)``."""
        return expm(self.sys.A.T * (t - self.grid.nodes[k + 1]))

    def state_at(self, t, k, Z):
        return self.local_propagator(t, k) @ Z[k + 1]
