"""The switching dual functional and its minimisation.

For a terminal adjoint state ``z_T`` with adjoint trajectory ``z(t)`` the
functional is

    J(z_T) = 1/2 int_0^T max_i alpha_i(t) |B_i^T z(t)|^2 dt + <y0, z(0)>
             [+ eps |z_T|]  [+ int_0^T <f(t), z(t)> dt]

with ``alpha_i(t) = 1 + sin(omega_i t) / 2``.  Its gradient at ``z_T`` equals
the terminal state reached by the switching control extracted from ``z_T``,
so a minimiser yields a null control.

Two quadratures are available.  ``"nodal"`` applies composite Simpson to the
grid samples of the integrand.  ``"resolved"`` (default) locates the instants
where the maximising channel changes and applies Gauss-Legendre rules on each
smooth piece, which keeps the gradient accurate even though the active
channel, and hence the integrand of the gradient, jumps at those instants.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize as _scipy_minimize
from scipy.special import logsumexp, softmax

from .adjoint import AdjointFlow
from .switching import tie_mask
from .system import kalman_check

log = logging.getLogger(__name__)

__all__ = [
    "WeightFamily",
    "Objective",
    "MinimizationResult",
    "NotControllableError",
    "Resolution",
    "resolve",
    "eval_J",
    "subgradient_J",
    "hessian_J",
    "el_residual",
    "minimize",
    "source_from_samples",
    "separable_source",
]

VARIANTS = ("exact", "approximate", "source")
QUADRATURES = ("resolved", "nodal")


class NotControllableError(ValueError):
    """The system fails the Kalman rank condition."""


@dataclass(frozen=True)
class WeightFamily:
    """Oscillating weights ``alpha_i(t) = 1 + sin(omega_i t) / 2``."""

    omegas: tuple

    def __post_init__(self):
        object.__setattr__(self, "omegas", tuple(float(w) for w in self.omegas))

    @property
    def n(self):
        return len(self.omegas)

    def alpha(self, t):
        return 1.0 + 0.5 * np.sin(np.multiply.outer(t, np.asarray(self.omegas)))

    def dalpha(self, t):
        om = np.asarray(self.omegas)
        return 0.5 * om * np.cos(np.multiply.outer(t, om))


def source_from_samples(grid, samples):
    """Cubic-spline source term through samples taken at the grid nodes."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != grid.N + 1:
        raise ValueError(f"expected {grid.N + 1} source samples, got {samples.shape[0]}")
    spline = CubicSpline(grid.nodes, samples, axis=0)
    return lambda t: spline(np.asarray(t, dtype=float))


def separable_source(profile, v):
    """Source ``f(t) = profile(t) * v``."""
    v = np.asarray(v, dtype=float)
    return lambda t: np.multiply.outer(profile(np.asarray(t, dtype=float)), v)


class Objective:
    """A discretised dual functional bound to one system, grid and ``y0``.

    Parameters
    ----------
    system : LtiSystem
    grid : TimeGrid
    weights : WeightFamily
        One frequency per actuator block.
    y0 : array_like
        Initial state to be steered to zero.
    variant : {"exact", "approximate", "source"}
    eps : float
        Penalty of the approximate variant.
    source : callable or array, optional
        Source term ``f`` of the source variant.  Callables take an array of
        times of shape ``(P,)`` and return ``(P, d)``; arrays are samples at the
        grid nodes, interpolated by a cubic spline.
    quadrature : {"resolved", "nodal"}
    """

    def __init__(self, system, grid, weights, y0, variant="exact", eps=0.0,
                 source=None, quadrature="resolved", gauss_order=3, flow=None):
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if quadrature not in QUADRATURES:
            raise ValueError(f"quadrature must be one of {QUADRATURES}")
        if weights.n != system.n_blocks:
            raise ValueError("need one weight frequency per actuator block")
        y0 = np.asarray(y0, dtype=float).ravel()
        if y0.shape != (system.dim,):
            raise ValueError(f"y0 must have length {system.dim}")
        if variant == "approximate" and not eps > 0:
            raise ValueError("approximate variant needs eps > 0")
        if variant == "source":
            if source is None:
                raise ValueError("source variant needs a source term")
            if not callable(source):
                source = source_from_samples(grid, source)
        self.system = system
        self.grid = grid
        self.weights = weights
        self.y0 = y0
        self.variant = variant
        self.eps = float(eps) if variant == "approximate" else 0.0
        self.source = source if variant == "source" else None
        self.quadrature = quadrature
        if flow is not None and (flow.sys is not system or flow.grid != grid
                                 or flow.gauss_order != gauss_order):
            flow = None
        self._flow = flow
        self.gauss_order = gauss_order

    @property
    def dim(self):
        return self.system.dim

    @cached_property
    def flow(self):
        return self._flow or AdjointFlow(self.system, self.grid, self.gauss_order)

    # point set used by the nodal rule, the smoothed functionals and the
    # smooth intervals of the resolved rule
    @cached_property
    def point_times(self):
        if self.quadrature == "nodal":
            return self.grid.nodes
        return self.flow.gauss_times

    @cached_property
    def point_weights(self):
        if self.quadrature == "nodal":
            return self.grid.weights
        return np.broadcast_to(self.grid.h * self.flow.w, self.flow.gauss_times.shape)

    @cached_property
    def point_alpha(self):
        return self.weights.alpha(self.point_times)

    @cached_property
    def node_alpha(self):
        return self.weights.alpha(self.grid.nodes)

    def point_states(self, Z):
        if self.quadrature == "nodal":
            return Z
        return self.flow.gauss_states(Z)

    def pull_back(self, V):
        """Map point vectors ``v_p`` to ``sum_p Phi(t_p)^T v_p``."""
        fl = self.flow
        if self.quadrature == "nodal":
            return np.einsum("kab,ka->b", fl.Phi, V)
        W = np.einsum("jab,kja->kb", fl.F, V)
        return np.einsum("kab,ka->b", fl.Phi[1:], W)

    @cached_property
    def _block_kernels(self):
        """``F_j^T B_i B_i^T F_j`` for every block ``i`` and Gauss point ``j``."""
        out = []
        for B in self.system.blocks:
            FB = np.einsum("jba,bc->jac", self.flow.F, B)
            out.append(np.einsum("jac,jbc->jab", FB, FB))
        return out

    @cached_property
    def source_term(self):
        """``int <f, z>`` as a linear form in ``z_T``."""
        if self.source is None:
            return np.zeros(self.dim)
        t = self.point_times
        vals = np.asarray(self.source(t.ravel()), dtype=float).reshape(t.shape + (self.dim,))
        c = self.point_weights
        return self.pull_back(c[..., None] * vals)

    @cached_property
    def linear_term(self):
        """Gradient of the affine part: ``Phi_0^T y0`` plus the source form."""
        return self.flow.Phi[0].T @ self.y0 + self.source_term

    @cached_property
    def gramian(self):
        """Sum-of-channels Gramian ``int sum_i alpha_i Phi^T B_i B_i^T Phi dt``."""
        c = self.point_weights
        alpha = self.point_alpha
        G = np.zeros((self.dim, self.dim))
        fl = self.flow
        for i, B in enumerate(self.system.blocks):
            coef = c * alpha[..., i]
            if self.quadrature == "nodal":
                M = np.einsum("kba,bc->kac", fl.Phi, B)
                G += np.einsum("k,kac,kbc->ab", coef, M, M)
            else:
                S = np.einsum("kj,jab->kab", coef, self._block_kernels[i])
                G += _congruence_sum(fl.Phi[1:], S)
        return 0.5 * (G + G.T)


def _congruence_sum(Phi, S):
    """``sum_k Phi_k^T S_k Phi_k``."""
    return np.einsum("kba,kbc->ac", Phi, S @ Phi)


@dataclass
class Resolution:
    """Everything the functional needs to know about one ``z_T``.

    ``pieces`` maps each interval ``k`` whose active channel is not constant
    to a list of ``(a, b, active)`` sub-intervals; ``crossings`` lists
    ``(k, tau, before, after)`` for every located switching instant.
    """

    z_T: np.ndarray
    Z: np.ndarray
    node_q: np.ndarray
    node_active: np.ndarray
    point_Z: np.ndarray
    point_q: np.ndarray
    point_active: np.ndarray
    smooth: np.ndarray
    pieces: dict = field(default_factory=dict)
    crossings: list = field(default_factory=list)
    extra: list = field(default_factory=list)


def _q_values(system, alpha, Z):
    """``alpha_i |B_i^T z|^2`` for stacked states ``Z`` of shape ``(..., d)``."""
    cols = [np.sum((Z @ B) ** 2, axis=-1) for B in system.blocks]
    return alpha * np.stack(cols, axis=-1)


class _LocalEval:
    """Point evaluations of the adjoint inside grid interval ``k``."""

    def __init__(self, obj, k, Zk1):
        self.obj = obj
        self.k = k
        self.Zk1 = Zk1
        self.At = obj.system.A.T

    def __call__(self, t):
        G = self.obj.flow.local_propagator(t, self.k)
        z = G @ self.Zk1
        return G, z

    def q(self, t):
        G, z = self(t)
        a = self.obj.weights.alpha(t)
        return _q_values(self.obj.system, a, z), z, G

    def dq(self, t, z):
        sysm = self.obj.system
        a = self.obj.weights.alpha(t)
        da = self.obj.weights.dalpha(t)
        dz = self.At @ z
        out = []
        for i, B in enumerate(sysm.blocks):
            eta = B.T @ z
            out.append(da[i] * eta @ eta + 2.0 * a[i] * eta @ (B.T @ dz))
        return np.array(out)


def _crossing(ev, i, j, lo, hi, T):
    """Instant in ``[lo, hi]`` where channels ``i`` and ``j`` exchange the max."""
    qlo, _, _ = ev.q(lo)
    qhi, _, _ = ev.q(hi)
    Dlo, Dhi = qlo[i] - qlo[j], qhi[i] - qhi[j]
    scale = max(abs(Dlo), abs(Dhi), qlo[i], qhi[j], 1e-300)
    if Dlo <= 0:
        return lo
    if Dhi >= 0:
        return hi
    t = lo + (hi - lo) * Dlo / (Dlo - Dhi)
    for _ in range(60):
        q, z, _ = ev.q(t)
        D = q[i] - q[j]
        if D > 0:
            lo = t
        else:
            hi = t
        if abs(D) <= 1e-15 * scale or hi - lo <= 1e-15 * T:
            break
        dD = ev.dq(t, z)
        dD = dD[i] - dD[j]
        tn = t - D / dD if dD != 0 else 0.5 * (lo + hi)
        if not lo < tn < hi:
            tn = 0.5 * (lo + hi)
        if abs(tn - t) <= 1e-16 * T:
            t = tn
            break
        t = tn
    return t


def _split(ev, lo, hi, a, b, T, depth=0):
    """Breakpoints between ``lo`` (channel ``a`` on top) and ``hi`` (``b``)."""
    if a == b:
        return []
    tau = _crossing(ev, a, b, lo, hi, T)
    q, _, _ = ev.q(tau)
    top = int(np.argmax(q))
    if depth < 4 and top not in (a, b) and q[top] > max(q[a], q[b]) * (1 + 1e-12):
        return (_split(ev, lo, tau, a, top, T, depth + 1)
                + _split(ev, tau, hi, top, b, T, depth + 1))
    return [(tau, a, b)]


def _resolve_interval(obj, res, k):
    fl = obj.flow
    t0, t1 = obj.grid.nodes[k], obj.grid.nodes[k + 1]
    ev = _LocalEval(obj, k, res.Z[k + 1])
    times = np.concatenate([[t0], fl.gauss_times[k], [t1]])
    acts = np.concatenate([[res.node_active[k]], res.point_active[k], [res.node_active[k + 1]]])
    cross = []
    for p in range(len(times) - 1):
        if acts[p] != acts[p + 1]:
            cross.extend(_split(ev, times[p], times[p + 1], int(acts[p]), int(acts[p + 1]),
                                obj.grid.T))
    cross.sort()
    bps = [t0] + [c[0] for c in cross] + [t1]
    pieces = []
    for a, b in zip(bps[:-1], bps[1:]):
        if b <= a:
            continue
        q, _, _ = ev.q(0.5 * (a + b))
        act = int(np.argmax(q))
        if pieces and pieces[-1][2] == act:
            pieces[-1] = (pieces[-1][0], b, act)
        else:
            pieces.append((a, b, act))
    res.pieces[k] = pieces
    for (_, b, before), (_, _, after) in zip(pieces[:-1], pieces[1:]):
        res.crossings.append((k, b, before, after))
    c, w = fl.c, fl.w
    for a, b, act in pieces:
        for cj, wj in zip(c, w):
            t = a + cj * (b - a)
            G, z = ev(t)
            res.extra.append((k, t, wj * (b - a), act, G, z))


def resolve(obj, z_T):
    """Classify and, for the resolved rule, split the intervals at switches."""
    z_T = np.asarray(z_T, dtype=float).ravel()
    Z = obj.flow.states(z_T)
    node_q = _q_values(obj.system, obj.node_alpha, Z)
    node_active = np.argmax(node_q, axis=-1)
    PZ = obj.point_states(Z)
    if obj.quadrature == "nodal":
        res = Resolution(z_T, Z, node_q, node_active, PZ, node_q, node_active,
                         np.ones(obj.grid.N + 1, dtype=bool))
        return res
    pq = _q_values(obj.system, obj.point_alpha, PZ)
    pact = np.argmax(pq, axis=-1)
    smooth = ((pact == pact[:, :1]).all(axis=1)
              & (node_active[:-1] == pact[:, 0]) & (node_active[1:] == pact[:, 0]))
    res = Resolution(z_T, Z, node_q, node_active, PZ, pq, pact, smooth)
    for k in np.nonzero(~smooth)[0]:
        _resolve_interval(obj, res, int(k))
    return res


def _quadratic_part(obj, res, hessian=False):
    """Value, gradient and (optionally) Hessian of ``1/2 int max_i q_i``."""
    sysm = obj.system
    c = obj.point_weights
    alpha = obj.point_alpha
    act = res.point_active
    mask = res.smooth if obj.quadrature == "nodal" else res.smooth[:, None]
    qmax = np.take_along_axis(res.point_q, act[..., None], axis=-1)[..., 0]
    value = 0.5 * np.sum(np.where(mask, c * qmax, 0.0))
    V = np.zeros(res.point_Z.shape)
    H = np.zeros((obj.dim, obj.dim)) if hessian else None
    fl = obj.flow
    for i, B in enumerate(sysm.blocks):
        coef = np.where(mask & (act == i), c * alpha[..., i], 0.0)
        V += (coef[..., None] * (res.point_Z @ B)) @ B.T
        if hessian:
            if obj.quadrature == "nodal":
                M = np.einsum("kba,bc->kac", fl.Phi, B)
                H += np.einsum("k,kac,kbc->ab", coef, M, M)
            else:
                S = np.einsum("kj,jab->kab", coef, obj._block_kernels[i])
                H += _congruence_sum(fl.Phi[1:], S)
    grad = obj.pull_back(V)
    if res.extra:
        d = obj.dim
        W = np.zeros((obj.grid.N, d))
        S = {} if hessian else None
        for k, t, cw, a, G, z in res.extra:
            al = obj.weights.alpha(t)[a]
            B = sysm.blocks[a]
            eta = B.T @ z
            value += 0.5 * cw * al * (eta @ eta)
            W[k] += G.T @ (cw * al * (B @ eta))
            if hessian:
                GB = G.T @ B
                S[k] = S.get(k, 0.0) + cw * al * (GB @ GB.T)
        grad = grad + np.einsum("kab,ka->b", fl.Phi[1:], W)
        if hessian:
            for k, Sk in S.items():
                H += fl.Phi[k + 1].T @ Sk @ fl.Phi[k + 1]
            for k, tau, a, b in res.crossings:
                ev = _LocalEval(obj, k, res.Z[k + 1])
                G, z = ev(tau)
                al = obj.weights.alpha(tau)
                Ba, Bb = sysm.blocks[a], sysm.blocks[b]
                dv = G.T @ (al[a] * Ba @ (Ba.T @ z) - al[b] * Bb @ (Bb.T @ z))
                dv = fl.Phi[k + 1].T @ dv
                dq = ev.dq(tau, z)
                slope = abs(dq[a] - dq[b])
                if slope > 0:
                    H += 2.0 * np.outer(dv, dv) / slope
    if hessian:
        H = 0.5 * (H + H.T)
    return value, grad, H


def _affine_value(obj, res):
    return float(obj.y0 @ res.Z[0] + obj.source_term @ res.z_T)


def _check_z(obj, z_T):
    z_T = np.asarray(z_T, dtype=float).ravel()
    if z_T.shape != (obj.dim,):
        raise ValueError(f"z_T must have length {obj.dim}, got {z_T.shape}")
    return z_T


def eval_J(obj, z_T, res=None):
    z_T = _check_z(obj, z_T)
    res = res or resolve(obj, z_T)
    value, _, _ = _quadratic_part(obj, res)
    value += _affine_value(obj, res)
    if obj.eps:
        value += obj.eps * np.linalg.norm(z_T)
    return float(value)


def _penalty_grad(obj, z_T):
    nz = np.linalg.norm(z_T)
    if obj.eps and nz > 0:
        return obj.eps * z_T / nz
    return np.zeros_like(z_T)


def subgradient_J(obj, z_T, res=None, with_flag=False):
    """A subgradient of ``J`` at ``z_T``.

    The max is differentiated along the maximising channel (smallest index on
    ties).  For the approximate variant at ``z_T = 0`` the penalty contributes
    nothing; pass ``with_flag=True`` to also receive whether that
    nonsmooth point was hit.
    """
    z_T = _check_z(obj, z_T)
    res = res or resolve(obj, z_T)
    _, g, _ = _quadratic_part(obj, res)
    g = g + obj.linear_term + _penalty_grad(obj, z_T)
    if with_flag:
        return g, bool(obj.eps and not np.any(z_T))
    return g


def hessian_J(obj, z_T, res=None):
    """Generalised Hessian: active-channel Gramian plus switching-instant terms."""
    z_T = _check_z(obj, z_T)
    res = res or resolve(obj, z_T)
    _, _, H = _quadratic_part(obj, res, hessian=True)
    nz = np.linalg.norm(z_T)
    if obj.eps and nz > 0:
        u = z_T / nz
        H = H + obj.eps * (np.eye(obj.dim) - np.outer(u, u)) / nz
    return H


def _residual_parts(obj, z_T, res=None):
    z_T = _check_z(obj, z_T)
    res = res or resolve(obj, z_T)
    _, gq, _ = _quadratic_part(obj, res)
    lin = obj.linear_term
    if obj.eps and not np.any(z_T):
        # minimal-norm element of lin + eps * unit ball
        nl = np.linalg.norm(lin)
        g = lin * max(0.0, 1.0 - obj.eps / nl) if nl > 0 else lin
    else:
        g = gq + lin + _penalty_grad(obj, z_T)
    denom = (np.linalg.norm(obj.y0) + np.linalg.norm(gq)
             + np.linalg.norm(obj.source_term) + obj.eps)
    return g, denom


def el_residual(obj, Z_T, res=None):
    """Normalised Euler-Lagrange defect ``max_j |dJ(Z_T) . e_j|``."""
    g, denom = _residual_parts(obj, Z_T, res)
    num = float(np.max(np.abs(g))) if g.size else 0.0
    return num / denom if denom > 0 else num


@dataclass
class MinimizationResult:
    Z_T: np.ndarray
    J_value: float
    el_residual: float
    iterations: int
    smoothing_path: list
    converged: bool
    tie_fraction: float


def _smoothed(obj, z_T, mu):
    """Log-sum-exp smoothing of the max on the fixed point set."""
    Z = obj.flow.states(z_T)
    PZ = obj.point_states(Z)
    q = _q_values(obj.system, obj.point_alpha, PZ)
    c = obj.point_weights
    value = 0.5 * np.sum(c * mu * logsumexp(q / mu, axis=-1))
    p = softmax(q / mu, axis=-1)
    V = np.zeros(PZ.shape)
    for i, B in enumerate(obj.system.blocks):
        coef = c * p[..., i] * obj.point_alpha[..., i]
        V += (coef[..., None] * (PZ @ B)) @ B.T
    value += obj.y0 @ Z[0] + obj.source_term @ z_T
    g = obj.pull_back(V) + obj.linear_term
    if obj.eps:
        nz = np.linalg.norm(z_T)
        value += obj.eps * nz
        g = g + _penalty_grad(obj, z_T)
    return float(value), g


def _tie_fraction(obj, res, tie_tol=1e-9):
    if not np.any(res.node_q):
        return 1.0
    ties, _ = tie_mask(res.node_q, tie_tol)
    return float(np.mean(ties))


MU_LADDER = tuple(10.0 ** -k for k in range(7))


def minimize(obj, tol=1e-9, max_iter=2000, mu_ladder=MU_LADDER, newton_iter=50):
    """Minimise ``J`` by a smoothing homotopy followed by a Newton polish.

    Each smoothed functional (max replaced by ``mu log sum exp(q / mu)``) is
    minimised with L-BFGS in coordinates whitened by the sum-of-channels
    Gramian.  The result is polished with damped generalised Newton steps
    on the exact functional until the Euler-Lagrange residual is below
    ``tol``.

    Raises
    ------
    NotControllableError
        If the Kalman rank condition fails (the functional is then not
        coercive).
    """
    kc = kalman_check(obj.system)
    if not kc.controllable:
        raise NotControllableError(f"Kalman rank {kc.rank} < {obj.dim}")
    d = obj.dim
    b = obj.linear_term
    zero = np.zeros(d)
    if not np.any(b) or (obj.eps and np.linalg.norm(b) <= obj.eps):
        res = resolve(obj, zero)
        return MinimizationResult(zero, eval_J(obj, zero, res), el_residual(obj, zero, res),
                                  0, [], True, _tie_fraction(obj, res))

    G = obj.gramian
    L = np.linalg.cholesky(G + 1e-15 * np.trace(G) / d * np.eye(d))
    z0 = -np.linalg.solve(G, b)
    x0 = L.T @ z0
    s = max(np.linalg.norm(x0), 1e-300)
    J0 = s * s

    def to_z(xi):
        return np.linalg.solve(L.T, s * xi)

    def grad_to_xi(g):
        return s * np.linalg.solve(L, g) / J0

    res0 = resolve(obj, z0)
    scale = float(np.max(res0.point_q)) or 1.0
    xi = x0 / s
    iterations = 0
    path = []
    gtol = 10.0 * tol
    for mu in mu_ladder:
        m = mu * scale
        fun = lambda v, m=m: _pair(obj, to_z(v), m, J0, grad_to_xi)
        out = _scipy_minimize(fun, xi, jac=True, method="L-BFGS-B",
                              options={"maxiter": max_iter, "gtol": gtol, "ftol": 1e-15,
                                       "maxcor": 20})
        xi = out.x
        iterations += int(out.nit)
        path.append(m)
    z = to_z(xi)
    z, it = _newton_polish(obj, z, tol, newton_iter)
    iterations += it
    res = resolve(obj, z)
    r = el_residual(obj, z, res)
    return MinimizationResult(z, eval_J(obj, z, res), r, iterations, path, r <= tol,
                              _tie_fraction(obj, res))


def _pair(obj, z, mu, J0, grad_to_xi):
    f, g = _smoothed(obj, z, mu)
    return f / J0, grad_to_xi(g)


def _newton_polish(obj, z, tol, max_iter):
    res = resolve(obj, z)
    f = eval_J(obj, z, res)
    g = subgradient_J(obj, z, res)
    it = 0
    for it in range(1, max_iter + 1):
        if el_residual(obj, z, res) <= 0.01 * tol:
            return z, it - 1
        H = hessian_J(obj, z, res)
        jitter = 1e-14 * max(np.trace(H), 1e-300) / obj.dim
        try:
            p = -np.linalg.solve(H + jitter * np.eye(obj.dim), g)
        except np.linalg.LinAlgError:
            p = -np.linalg.lstsq(H, g, rcond=None)[0]
        if not g @ p < 0:
            p = -g
        step = 1.0
        gn = np.linalg.norm(g)
        accepted = False
        for _ in range(30):
            zn = z + step * p
            rn = resolve(obj, zn)
            fn = eval_J(obj, zn, rn)
            gnew = subgradient_J(obj, zn, rn)
            if fn <= f + 1e-4 * step * (g @ p) or np.linalg.norm(gnew) < 0.5 * gn:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            log.debug("newton polish stalled at iteration %d", it)
            return z, it
        z, res, f, g = zn, rn, fn, gnew
    return z, it
