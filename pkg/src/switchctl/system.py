"""Controlled linear systems, Kalman test and resonance-free frequency plans."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import Spectrum, check_finite, eigenvalues, numerical_rank

__all__ = [
    "LtiSystem",
    "KalmanResult",
    "kalman_matrix",
    "kalman_check",
    "ForbiddenSet",
    "forbidden_set_W",
    "forbidden_set_next",
    "FrequencyPlan",
    "plan_frequencies",
    "DEFAULT_MARGIN",
]

DEFAULT_MARGIN = 0.5
STRUCTURES = ("general", "self_adjoint")


@dataclass(frozen=True)
class LtiSystem:
    """The system ``y' + A y = sum_i B_i u_i`` with actuator blocks ``B_i``.

    The full input matrix is the column concatenation of the blocks, so the
    i-th control ``u_i`` lives in ``R^{m_i}`` with ``m_i = B_i.shape[1]``.
    """

    A: np.ndarray
    blocks: tuple
    label: str = ""
    structure: str = "general"

    def __post_init__(self):
        A = np.atleast_2d(check_finite(np.asarray(self.A, dtype=float), "A"))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        d = A.shape[0]
        blocks = []
        for i, B in enumerate(self.blocks):
            B = np.asarray(B, dtype=float)
            if B.ndim == 1:
                B = B.reshape(-1, 1)
            check_finite(B, f"B_{i + 1}")
            if B.ndim != 2 or B.shape[0] != d or B.shape[1] < 1:
                raise ValueError(f"B_{i + 1} must have shape ({d}, m), got {B.shape}")
            B.setflags(write=False)
            blocks.append(B)
        if not blocks:
            raise ValueError("at least one actuator block is required")
        if self.structure not in STRUCTURES:
            raise ValueError(f"structure must be one of {STRUCTURES}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "blocks", tuple(blocks))
        if self.structure == "self_adjoint":
            scale = max(np.linalg.norm(A), 1e-300)
            if np.linalg.norm(A - A.T) > 1e-12 * scale:
                raise ValueError("self_adjoint system requires a symmetric A")
            if np.linalg.eigvalsh(0.5 * (A + A.T))[0] <= 0.0:
                raise ValueError("self_adjoint system requires a positive definite A")

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def n_blocks(self):
        return len(self.blocks)

    @property
    def block_dims(self):
        return tuple(B.shape[1] for B in self.blocks)

    @property
    def B(self):
        return np.hstack(self.blocks)

    def block_slices(self):
        out, start = [], 0
        for m in self.block_dims:
            out.append(slice(start, start + m))
            start += m
        return out

    def spectrum(self, tol=1e-8):
        """Spectrum of the adjoint generator ``A^T``."""
        return eigenvalues(self.A.T, tol)


@dataclass(frozen=True)
class KalmanResult:
    controllable: bool
    rank: int

    def __bool__(self):
        return self.controllable


def kalman_matrix(A, B):
    """``[B, A B, ..., A^{d-1} B]`` built from ``A / ||A||`` (same column space)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    d = A.shape[0]
    nA = np.linalg.norm(A, 2)
    As = A / nA if nA > 0 else A
    cols = [B]
    for _ in range(d - 1):
        cols.append(As @ cols[-1])
    return np.hstack(cols)


def kalman_check(sys, tol=1e-10):
    """Kalman rank test on ``(A, [B_1 ... B_n])``."""
    K = kalman_matrix(sys.A, sys.B)
    # powers of A can shrink quickly; normalise each block so the rank
    # threshold is not dictated by the largest power alone
    d = sys.dim
    m = sys.B.shape[1]
    for j in range(d):
        blk = K[:, j * m:(j + 1) * m]
        nb = np.linalg.norm(blk)
        if nb > 0:
            K[:, j * m:(j + 1) * m] = blk / nb
    r = numerical_rank(K, tol)
    return KalmanResult(controllable=(r == d), rank=r)


@dataclass(frozen=True)
class ForbiddenSet:
    """Finite set of frequencies that may resonate with the spectrum."""

    values: np.ndarray
    provenance: str = "W"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __contains__(self, omega):
        return bool(np.any(np.abs(self.values - omega) <= 1e-12 * max(1.0, abs(omega))))

    def __len__(self):
        return len(self.values)

    def distance(self, omega):
        return float(np.min(np.abs(self.values - omega)))


def _merge(values, tol):
    vals = np.sort(np.asarray(values, dtype=float))
    if len(vals) == 0:
        return vals
    out = [vals[0]]
    for v in vals[1:]:
        if v - out[-1] > tol:
            out.append(v)
    out = np.array(out)
    # snap exact zero so that 0 is always a member
    out[np.abs(out) <= tol] = 0.0
    return out


def _equal_real_differences(spectrum, group_tol):
    lam = np.asarray(spectrum.values if isinstance(spectrum, Spectrum) else spectrum, dtype=complex)
    same = np.abs(lam.real[:, None] - lam.real[None, :]) <= group_tol
    diff = lam.imag[:, None] - lam.imag[None, :]
    return diff[same]


def _default_group_tol(spectrum):
    lam = np.asarray(spectrum.values if isinstance(spectrum, Spectrum) else spectrum, dtype=complex)
    scale = np.max(np.abs(lam)) if len(lam) else 0.0
    return 1e-8 * max(scale, 1.0)


def forbidden_set_W(spectrum, group_tol=None):
    """Zero together with imaginary-part gaps (and their halves) between
    eigenvalues sharing a real part."""
    if group_tol is None:
        group_tol = _default_group_tol(spectrum)
    diffs = _equal_real_differences(spectrum, group_tol)
    vals = np.concatenate([[0.0], diffs, 0.5 * diffs])
    return ForbiddenSet(_merge(vals, group_tol), provenance="W")


def forbidden_set_next(W_prev, chosen, spectrum, group_tol=None):
    """Extend a forbidden set by the shifts ``+-w`` and ``+-w + gap`` of every
    already chosen nonzero frequency ``w``."""
    if group_tol is None:
        group_tol = _default_group_tol(spectrum)
    chosen = [float(w) for w in chosen if w != 0.0]
    if not chosen:
        return W_prev
    diffs = _equal_real_differences(spectrum, group_tol)
    extra = []
    for w in chosen:
        extra.extend([w, -w])
        extra.extend(w + diffs)
        extra.extend(-w + diffs)
    vals = np.concatenate([W_prev.values, np.asarray(extra)])
    return ForbiddenSet(_merge(vals, group_tol), provenance=f"W_{len(chosen) + 2}")


@dataclass(frozen=True)
class FrequencyPlan:
    omegas: tuple
    margin: float
    mode: str
    forbidden_sets: tuple = field(default_factory=tuple)

    def check(self):
        """Raise ``AssertionError`` if the plan violates its invariants."""
        om = np.asarray(self.omegas, dtype=float)
        if self.mode == "self_adjoint":
            assert np.all(om >= 0), "frequencies must be nonnegative"
            assert len(set(om.tolist())) == len(om), "frequencies must be distinct"
            assert np.sum(om == 0) <= 1
        else:
            assert om[0] == 0.0
            for m in range(1, len(om)):
                W = self.forbidden_sets[m - 1]
                assert W.distance(om[m]) >= self.margin, (m, om[m])
        return True


MAX_LADDER = 10 ** 6


def plan_frequencies(sys, n=None, margin=DEFAULT_MARGIN, group_tol=None):
    """Choose the oscillation frequencies of the weights ``1 + sin(w_i t)/2``.

    Self-adjoint systems only need pairwise distinct frequencies, so the plan
    is ``(0, margin, 2 margin, ...)``.  For general systems ``w_1 = 0`` and each
    subsequent ``w_m`` is the smallest multiple ``k * margin`` whose distance
    to the current forbidden set exceeds ``margin``.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    if n is None:
        n = sys.n_blocks
    spectrum = sys.spectrum()
    if group_tol is None:
        group_tol = 1e-8 * max(np.linalg.norm(sys.A, 2), 1.0)
    W = forbidden_set_W(spectrum, group_tol)
    if sys.structure == "self_adjoint":
        plan = FrequencyPlan(tuple(float(i * margin) for i in range(n)), margin,
                             "self_adjoint", (W,))
        plan.check()
        return plan
    omegas = [0.0]
    sets = []
    current = W
    slack = 1e-9 * max(1.0, margin)
    for _ in range(1, n):
        sets.append(current)
        for k in range(1, MAX_LADDER + 1):
            cand = k * margin
            if current.distance(cand) > margin + slack:
                break
        else:
            raise RuntimeError("frequency ladder exhausted")
        omegas.append(float(cand))
        current = forbidden_set_next(current, omegas, spectrum, group_tol)
    plan = FrequencyPlan(tuple(omegas), margin, "general", tuple(sets))
    plan.check()
    return plan
