"""Dense real-matrix kernels: exponential, rank revealing, PSD Cholesky.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  Every entry
point validates its input through :func:`as_matrix`, so downstream code may
assume finite, two-dimensional arrays.
"""

from typing import NamedTuple

import numpy as np

from .errors import Asymmetric, NonFinite, NonSquare, NotPSD

DEFAULT_RANK_TOL = 1e-10


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D float64 array (a fresh copy)."""
    arr = np.array(M, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise NonFinite(f"{name}[{i}][{j}] is not finite")
    return arr


def _square(M, name="matrix"):
    arr = as_matrix(M, name)
    if arr.shape[0] != arr.shape[1]:
        raise NonSquare(f"{name} must be square, got shape {arr.shape}")
    return arr


# Pade coefficients and 1-norm thresholds from Higham, SIAM J. Matrix Anal.
# Appl. 26 (2005); theta_m bounds the backward error by the unit roundoff.
_PADE = {
    3: (1.495585217958292e-2, (120.0, 60.0, 12.0, 1.0)),
    5: (2.539398330063230e-1, (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0)),
    7: (9.504178996162932e-1,
        (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0)),
    9: (2.097847961257068e0,
        (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
         2162160.0, 110880.0, 3960.0, 90.0, 1.0)),
}
_THETA13 = 5.371920351148152e0
_B13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
    16380.0, 182.0, 1.0,
)


def _pade_low(A, b):
    n = A.shape[0]
    ident = np.eye(n)
    A2 = A @ A
    powers = [ident, A2]
    while 2 * len(powers) < len(b):
        powers.append(powers[-1] @ A2)
    U = A @ sum(b[2 * k + 1] * P for k, P in enumerate(powers))
    V = sum(b[2 * k] * P for k, P in enumerate(powers))
    return U, V


def _pade13(A):
    b = _B13
    ident = np.eye(A.shape[0])
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    return U, V


def expm(M):
    """Matrix exponential by scaling and squaring with diagonal Pade approximants.

    Uses the degree selection of Higham (2005): the lowest Pade degree whose
    1-norm threshold covers ``M``, otherwise degree 13 after scaling by a
    power of two.
    """
    A = _square(M, "M")
    norm = np.linalg.norm(A, 1)
    if norm == 0.0:
        return np.eye(A.shape[0])
    for m, (theta, b) in _PADE.items():
        if norm <= theta:
            U, V = _pade_low(A, b)
            return np.linalg.solve(V - U, V + U)
    s = max(0, int(np.ceil(np.log2(norm / _THETA13))))
    U, V = _pade13(A / 2.0**s)
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


class RankInfo(NamedTuple):
    rank: int
    basis: np.ndarray  # rows x rank, orthonormal columns
    pivots: tuple  # original column indices in selection order


def numerical_rank(M, rel_tol=DEFAULT_RANK_TOL, scale=None):
    """Rank and column-space basis via Gram-Schmidt with column pivoting.

    At each step the column with the largest residual norm is selected
    (lowest index on ties) and orthogonalised twice against the basis built
    so far.  Selection stops once the largest residual falls to
    ``rel_tol * scale``, where ``scale`` defaults to the largest column norm
    of ``M``.
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValueError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    R = as_matrix(M, "M")
    rows, cols = R.shape
    if scale is None:
        scale = float(np.max(np.linalg.norm(R, axis=0)))
    threshold = rel_tol * scale
    basis = np.zeros((rows, 0))
    pivots = []
    available = np.ones(cols, dtype=bool)
    while len(pivots) < min(rows, cols):
        norms = np.where(available, np.linalg.norm(R, axis=0), -1.0)
        j = int(np.argmax(norms))
        if norms[j] <= threshold or norms[j] <= 0.0:
            break
        v = R[:, j].copy()
        for _ in range(2):
            v -= basis @ (basis.T @ v)
        nv = np.linalg.norm(v)
        if nv <= threshold or nv <= 0.0:
            available[j] = False
            continue
        q = v / nv
        basis = np.column_stack([basis, q])
        pivots.append(j)
        available[j] = False
        R -= np.outer(q, q @ R)
    return RankInfo(len(pivots), basis, tuple(pivots))


def chol_psd(M, jitter=0.0, zero_tol=1e-12, neg_tol=1e-9):
    """Lower Cholesky factor of a symmetric positive semidefinite matrix.

    Returns ``L`` with ``L @ L.T == M + jitter * trace(M) / rows * I``.
    Pivots at or below ``zero_tol * scale`` (``scale`` the largest diagonal
    entry) are treated as exact zeros and their columns left empty, so
    degenerate directions such as a pinned endpoint are handled without
    jitter.  A pivot below ``-neg_tol * scale`` raises :class:`NotPSD`.
    """
    S = _square(M, "M")
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    mag = np.max(np.abs(S))
    if np.max(np.abs(S - S.T)) > 1e-10 * mag:
        raise Asymmetric("matrix is not symmetric to 1e-10 relative")
    S = 0.5 * (S + S.T)
    n = S.shape[0]
    if jitter:
        S[np.diag_indices(n)] += jitter * np.trace(S) / n
    scale = max(float(np.max(np.diag(S))), 0.0)
    L = np.zeros_like(S)
    for j in range(n):
        row = L[j, :j]
        pivot = S[j, j] - row @ row
        if pivot <= zero_tol * scale:
            if pivot < -neg_tol * scale or (scale == 0.0 and pivot < 0.0):
                raise NotPSD(
                    f"pivot {j} is {pivot:.3e} (scale {scale:.3e}); "
                    "matrix is not positive semidefinite, consider jitter"
                )
            continue
        d = np.sqrt(pivot)
        L[j, j] = d
        L[j + 1:, j] = (S[j + 1:, j] - L[j + 1:, :j] @ row) / d
    return L
