"""Independent reference computations used by the tests.

Nothing here imports the package: these are deliberately naive
re-derivations (explicit loops, exact rationals, closed forms).
"""

from fractions import Fraction
import math


def brute_forbidden(eigs, tol=1e-9):
    """Zero plus every imaginary gap and half gap over equal-real-part pairs."""
    out = [0.0]
    for a in eigs:
        for b in eigs:
            if abs(a.real - b.real) <= tol:
                out.append(a.imag - b.imag)
                out.append(0.5 * (a.imag - b.imag))
    return dedupe(out, tol)


def brute_forbidden_next(W, chosen, eigs, tol=1e-9):
    out = list(W)
    for w in chosen:
        if w == 0:
            continue
        out += [w, -w]
        for a in eigs:
            for b in eigs:
                if abs(a.real - b.real) <= tol:
                    out += [w + a.imag - b.imag, -w + a.imag - b.imag]
    return dedupe(out, tol)


def dedupe(values, tol):
    vals = sorted(values)
    out = []
    for v in vals:
        if not out or v - out[-1] > tol:
            out.append(v)
    return [0.0 if abs(v) <= tol else v for v in out]


def same_set(a, b, tol=1e-9):
    a, b = sorted(a), sorted(b)
    return len(a) == len(b) and all(abs(x - y) <= tol for x, y in zip(a, b))


def exact_rank(rows):
    """Rank of an integer matrix by fraction-exact Gaussian elimination."""
    M = [[Fraction(int(x)) for x in r] for r in rows]
    if not M:
        return 0
    n_rows, n_cols = len(M), len(M[0])
    rank, col = 0, 0
    while rank < n_rows and col < n_cols:
        piv = next((r for r in range(rank, n_rows) if M[r][col] != 0), None)
        if piv is None:
            col += 1
            continue
        M[rank], M[piv] = M[piv], M[rank]
        for r in range(rank + 1, n_rows):
            f = M[r][col] / M[rank][col]
            if f:
                M[r] = [x - f * y for x, y in zip(M[r], M[rank])]
        rank += 1
        col += 1
    return rank


def int_matmul(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))]
            for i in range(len(A))]


def krylov_int(A, B):
    d = len(A)
    blocks = [B]
    for _ in range(d - 1):
        blocks.append(int_matmul(A, blocks[-1]))
    return [sum((blk[i] for blk in blocks), []) for i in range(d)]


def scalar_gramian(a, T):
    """int_0^T exp(2 a (t - T)) dt."""
    if a == 0:
        return T
    return (1.0 - math.exp(-2.0 * a * T)) / (2.0 * a)


def heat_eigenvalues(d, L):
    h = L / (d + 1)
    return sorted(4.0 / h ** 2 * math.sin(j * math.pi / (2 * (d + 1))) ** 2
                  for j in range(1, d + 1))
