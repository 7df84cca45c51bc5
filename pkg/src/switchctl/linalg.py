"""Dense matrix primitives: matrix exponential, spectra and numerical rank."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["expm", "Spectrum", "eigenvalues", "numerical_rank", "check_finite"]


def check_finite(M, name="matrix"):
    M = np.asarray(M)
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def _square(M, name="matrix"):
    M = check_finite(M, name)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    return M


# Diagonal Pade coefficients b_0..b_m and the 1-norm bounds theta_m below which
# the degree-m approximant is accurate to unit roundoff (Higham 2005).
_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}
_THETA = ((3, 1.495585217958292e-2), (5, 2.539398330063230e-1),
          (7, 9.504178996162932e-1), (9, 2.097847961257068e0))
_THETA_13 = 5.371920351148152e0


def _pade_uv(M, m):
    b = _PADE[m]
    n = M.shape[0]
    eye = np.eye(n, dtype=M.dtype)
    M2 = M @ M
    if m == 13:
        M4 = M2 @ M2
        M6 = M2 @ M4
        U = M @ (M6 @ (b[13] * M6 + b[11] * M4 + b[9] * M2)
                 + b[7] * M6 + b[5] * M4 + b[3] * M2 + b[1] * eye)
        V = (M6 @ (b[12] * M6 + b[10] * M4 + b[8] * M2)
             + b[6] * M6 + b[4] * M4 + b[2] * M2 + b[0] * eye)
        return U, V
    powers = [eye, M2]
    while len(powers) < (m + 1) // 2:
        powers.append(powers[-1] @ M2)
    U = sum(b[2 * j + 1] * powers[j] for j in range((m + 1) // 2))
    V = sum(b[2 * j] * powers[j] for j in range((m + 1) // 2))
    return M @ U, V


def expm(M):
    """Matrix exponential by scaling and squaring with diagonal Pade approximants.

    Degrees 3, 5, 7, 9 are used for small 1-norms, otherwise the matrix is
    scaled by ``2**-s`` so that degree 13 applies, then squared ``s`` times.
    """
    M = _square(M)
    dtype = np.result_type(M.dtype, np.float64)
    M = M.astype(dtype, copy=False)
    n = M.shape[0]
    if n == 0:
        return M.copy()
    norm1 = np.linalg.norm(M, 1)
    for m, theta in _THETA:
        if norm1 <= theta:
            U, V = _pade_uv(M, m)
            return np.linalg.solve(V - U, V + U)
    s = max(0, int(np.ceil(np.log2(norm1 / _THETA_13))))
    Ms = M / 2.0 ** s
    U, V = _pade_uv(Ms, 13)
    E = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        E = E @ E
    return E


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues with algebraic multiplicity.

    ``values`` lists every eigenvalue (repeated by multiplicity), sorted by
    real part then imaginary part.  ``clusters`` holds ``(center, multiplicity)``
    pairs for groups of eigenvalues closer than the clustering tolerance.
    """

    values: np.ndarray
    clusters: tuple
    tol: float

    @property
    def dim(self):
        return len(self.values)

    def multiplicity(self, lam):
        for center, mult in self.clusters:
            if abs(center - lam) <= max(self.tol, 1e-300):
                return mult
        return 0


def _cluster(values, tol):
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if n:
        dist = np.abs(values[:, None] - values[None, :])
        for i, j in zip(*np.nonzero(np.triu(dist <= tol, 1))):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[rj] = ri
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    clusters = []
    for members in groups.values():
        center = complex(np.mean(values[members]))
        clusters.append((center, len(members)))
    clusters.sort(key=lambda c: (c[0].real, c[0].imag))
    return tuple(clusters)


def eigenvalues(M, tol=1e-8):
    """Eigenvalues of a square matrix, grouped by multiplicity.

    The eigenvalues themselves come from LAPACK (Hessenberg reduction followed
    by shifted QR).  Eigenvalues within ``tol * ||M||_2`` of each other are
    clustered; defective eigenvalues perturbed by roundoff end up in one
    cluster.

    Raises
    ------
    ValueError
        Non-square or non-finite input.
    np.linalg.LinAlgError
        QR iteration did not converge.
    """
    M = _square(M)
    vals = np.linalg.eigvals(M).astype(complex)
    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    scale = np.linalg.norm(M, 2) if M.size else 0.0
    ctol = float(tol * scale)
    return Spectrum(values=vals, clusters=_cluster(vals, ctol), tol=ctol)


def numerical_rank(M, tol=1e-10):
    """Number of singular values above ``tol`` times the largest one."""
    M = np.atleast_2d(check_finite(M))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))
