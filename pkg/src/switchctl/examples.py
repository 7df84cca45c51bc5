"""Generators for semidiscretised heat/wave equations, Galerkin-truncated
coupled parabolic systems and random controllable pairs."""

from __future__ import annotations

import numpy as np

from .system import LtiSystem, kalman_check

__all__ = [
    "dirichlet_laplacian",
    "make_heat",
    "make_wave",
    "make_coupled_parabolic",
    "make_random_controllable",
    "make_full_actuation",
]


def dirichlet_laplacian(d, L):
    """``(1/h^2) tridiag(-1, 2, -1)`` with ``h = L / (d + 1)``."""
    if d < 1 or not L > 0:
        raise ValueError("need d >= 1 and L > 0")
    h = L / (d + 1)
    K = 2.0 * np.eye(d) - np.eye(d, k=1) - np.eye(d, k=-1)
    return K / (h * h)


def _unit_columns(d, rows=None, total=None):
    total = d if total is None else total
    rows = range(d) if rows is None else rows
    out = []
    for r in rows:
        e = np.zeros((total, 1))
        e[r, 0] = 1.0
        out.append(e)
    return out


def make_heat(d, L=1.0):
    """Finite-difference heat equation on ``(0, L)``, one actuator per node."""
    A = dirichlet_laplacian(d, L)
    return LtiSystem(A, tuple(_unit_columns(d)), label=f"heat(d={d}, L={L:g})",
                     structure="self_adjoint")


def make_full_actuation(A, label="full actuation"):
    """``y' + A y = (u_1, ..., u_d)``: any square ``A`` with ``B_i = e_i``."""
    A = np.asarray(A, dtype=float)
    return LtiSystem(A, tuple(_unit_columns(A.shape[0])), label=label)


def make_wave(d, L=1.0):
    """Finite-difference wave equation in first-order form on ``(y, y')``.

    ``A = [[0, -I], [Lap, 0]]`` and ``B_i = (0; e_i)`` (force at node ``i``).
    """
    Lap = dirichlet_laplacian(d, L)
    A = np.block([[np.zeros((d, d)), -np.eye(d)], [Lap, np.zeros((d, d))]])
    blocks = tuple(_unit_columns(d, rows=range(d, 2 * d), total=2 * d))
    return LtiSystem(A, blocks, label=f"wave(d={d}, L={L:g})", structure="general")


def _interval_gram(modes, a, b):
    """``int_a^b phi_j phi_l dx`` for the orthonormal sine basis of ``(0, pi)``."""
    j = np.arange(1, modes + 1)
    J, Lm = np.meshgrid(j, j, indexing="ij")

    def prim(x):
        out = np.empty(J.shape)
        same = J == Lm
        dm = np.where(same, 1, J - Lm)
        out[~same] = (np.sin(dm * x) / dm)[~same]
        out[same] = x
        out -= np.sin((J + Lm) * x) / (J + Lm)
        return out / np.pi

    return prim(b) - prim(a)


def make_coupled_parabolic(modes, d1, d2, P, actuator_profile=None):
    """Sine-Galerkin truncation of ``y_t - D y_xx + P y = 1_O (u_1, u_2)`` on ``(0, pi)``.

    The state is ordered mode by mode, ``(y1_1, y2_1, y1_2, y2_2, ...)``.  With
    ``actuator_profile=None`` the control region is the whole interval and each
    control acts diagonally on the modes of its component.  Passing an
    interval ``(a, b)`` projects the indicator of that region onto the basis.
    """
    P = np.asarray(P, dtype=float)
    if modes < 1 or not (d1 > 0 and d2 > 0):
        raise ValueError("need modes >= 1 and positive diffusivities")
    if P.shape != (2, 2) or not np.allclose(P, P.T, rtol=0, atol=1e-14):
        raise ValueError("P must be a symmetric 2x2 matrix")
    if np.linalg.eigvalsh(P)[0] <= 0:
        raise ValueError("P must be positive definite")
    d = 2 * modes
    A = np.zeros((d, d))
    for j in range(1, modes + 1):
        s = slice(2 * (j - 1), 2 * j)
        A[s, s] = j * j * np.diag([d1, d2]) + P
    if actuator_profile is None:
        M = np.eye(modes)
    else:
        a, b = actuator_profile
        if not 0 <= a < b <= np.pi:
            raise ValueError("actuator region must be a subinterval of (0, pi)")
        M = _interval_gram(modes, a, b)
    B1 = np.zeros((d, modes))
    B2 = np.zeros((d, modes))
    B1[0::2, :] = M
    B2[1::2, :] = M
    return LtiSystem(A, (B1, B2), label=f"coupled_parabolic(modes={modes})",
                     structure="self_adjoint")


def make_random_controllable(d, n=2, block_dims=None, seed=0, max_tries=100):
    """Seeded random pair with entries uniform in ``[-1, 1]``, resampled until
    the Kalman condition holds."""
    if block_dims is None:
        block_dims = (1,) * n
    block_dims = tuple(int(m) for m in block_dims)
    if len(block_dims) != n:
        raise ValueError("need one block dimension per control")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        A = rng.uniform(-1.0, 1.0, (d, d))
        B = rng.uniform(-1.0, 1.0, (d, sum(block_dims)))
        blocks = tuple(np.split(B, np.cumsum(block_dims)[:-1], axis=1))
        sysm = LtiSystem(A, blocks, label=f"random(d={d}, seed={seed})")
        if kalman_check(sysm).controllable:
            return sysm
    raise RuntimeError(f"no controllable sample in {max_tries} draws")
