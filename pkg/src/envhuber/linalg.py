"""Dense linear-algebra helpers shared across the package.

Conventions used everywhere: ``vec`` stacks columns; ``vech`` stacks the
lower triangle column by column.  The contraction/expansion pair maps
between the two for symmetric matrices.
"""

from functools import lru_cache

import numpy as np

__all__ = [
    "vech",
    "unvech",
    "vech_indices",
    "contraction_matrix",
    "expansion_matrix",
    "commutation_matrix",
    "orthonormal_complement",
    "sym_pinv",
    "sym_inv",
    "projection",
    "subspace_distance",
]


@lru_cache(maxsize=64)
def vech_indices(p):
    """Row/column index arrays of the lower triangle, column-major order."""
    cols, rows = np.triu_indices(p)  # upper triangle row-major == lower col-major, swapped
    return rows, cols


def vech(M):
    """Half-vectorize a square matrix.

    Stacks the lower triangle of ``M`` column by column into a vector of
    length p(p+1)/2.  ``M`` is not checked for symmetry; the lower
    triangle is what gets read.
    """
    M = np.asarray(M)
    p = M.shape[0]
    rows, cols = vech_indices(p)
    return M[rows, cols].copy()


def unvech(v):
    """Inverse of :func:`vech` for symmetric matrices."""
    v = np.asarray(v)
    s = v.shape[0]
    p = int(round((np.sqrt(8 * s + 1) - 1) / 2))
    if p * (p + 1) // 2 != s:
        raise ValueError(f"length {s} is not a triangular number")
    M = np.zeros((p, p), dtype=v.dtype)
    rows, cols = vech_indices(p)
    M[rows, cols] = v
    M[cols, rows] = v
    return M


@lru_cache(maxsize=32)
def expansion_matrix(p):
    """Duplication matrix E_p with vec(M) = E_p vech(M) for symmetric M."""
    s = p * (p + 1) // 2
    E = np.zeros((p * p, s))
    rows, cols = vech_indices(p)
    for k in range(s):
        i, j = rows[k], cols[k]
        E[j * p + i, k] = 1.0
        E[i * p + j, k] = 1.0
    return E


@lru_cache(maxsize=32)
def contraction_matrix(p):
    """Contraction matrix C_p with vech(M) = C_p vec(M) for symmetric M.

    Taken as the Moore-Penrose inverse of the duplication matrix, so
    off-diagonal entries of a non-symmetric argument are averaged.  This
    is the version for which C_p K_p = C_p (K_p the commutation matrix),
    which the envelope Jacobian relies on.
    """
    s = p * (p + 1) // 2
    C = np.zeros((s, p * p))
    rows, cols = vech_indices(p)
    for k in range(s):
        i, j = rows[k], cols[k]
        if i == j:
            C[k, i * p + i] = 1.0
        else:
            C[k, j * p + i] = 0.5
            C[k, i * p + j] = 0.5
    return C


@lru_cache(maxsize=32)
def commutation_matrix(p, q=None):
    """K with K vec(M) = vec(M') for p x q matrices M."""
    q = p if q is None else q
    K = np.zeros((p * q, p * q))
    for i in range(p):
        for j in range(q):
            K[i * q + j, j * p + i] = 1.0
    return K


def orthonormal_complement(G):
    """Orthonormal basis of the orthogonal complement of span(G).

    Parameters
    ----------
    G : (p, u) ndarray
        Basis, full column rank; need not be orthonormal.

    Returns
    -------
    (p, p - u) ndarray with orthonormal columns spanning span(G)^perp.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    p, u = G.shape
    if u == 0:
        return np.eye(p)
    if u > p:
        raise ValueError(f"basis is {p} x {u}, more columns than rows")
    # full QR; the trailing columns of Q are the complement
    Q, R = np.linalg.qr(G, mode="complete")
    rank = np.sum(np.abs(np.diag(R[:u, :u])) > 1e-12 * max(1.0, np.abs(R).max()))
    if rank < u:
        raise np.linalg.LinAlgError("basis is column rank deficient")
    return Q[:, u:]


def sym_pinv(M, tol=None):
    """Pseudo-inverse of a symmetric matrix via eigendecomposition.

    Eigenvalues with magnitude below ``tol`` (default 1e-10 times the
    largest magnitude) are treated as zero.  Negative eigenvalues above
    the cut are inverted as-is, so the result is the true Moore-Penrose
    inverse of the symmetrized input.
    """
    M = np.asarray(M, dtype=float)
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    amax = np.abs(w).max() if w.size else 0.0
    if amax == 0.0:
        return np.zeros_like(M)
    cut = (1e-10 * amax) if tol is None else tol * amax
    inv_w = np.where(np.abs(w) > cut, 1.0 / np.where(w == 0, 1.0, w), 0.0)
    return (V * inv_w) @ V.T


def sym_inv(M):
    """Inverse of a symmetric positive definite matrix, rejecting non-SPD input."""
    M = np.asarray(M, dtype=float)
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    if w.min() <= 0:
        raise np.linalg.LinAlgError(
            f"matrix is not positive definite (min eigenvalue {w.min():.3e})"
        )
    return (V / w) @ V.T


def projection(G):
    """Orthogonal projection onto span(G) (G need not be orthonormal)."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if G.shape[1] == 0:
        return np.zeros((G.shape[0], G.shape[0]))
    return G @ sym_pinv(G.T @ G) @ G.T


def subspace_distance(A, B):
    """Frobenius distance between projections onto span(A) and span(B).

    Zero iff the spans agree; invariant to the choice of basis.  For
    one-dimensional spans of unit vectors a, b this is
    sqrt(2 (1 - (a'b)^2)).
    """
    return float(np.linalg.norm(projection(A) - projection(B), ord="fro"))
