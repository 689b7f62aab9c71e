"""Model ingestion: rank condition, adapted filtration, u-blocks, principal part.

A model is the pair (A, B) of the linear SDE ``dx = eps*A*x dt + sqrt(eps)*B dW``.
The filtration ``E_k = span{A^l B v : l < k}`` grows until it fills R^d after
``n`` steps; an orthonormal basis whose leading ``d_k`` vectors span ``E_k``
is the coordinate system in which the small-time scalings are diagonal.
"""

from dataclasses import dataclass, field
from functools import cached_property
from math import factorial

import numpy as np

from .errors import NotControllable, ShapeMismatch
from .matcore import DEFAULT_RANK_TOL, as_matrix, numerical_rank


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Drift matrix ``A`` (d x d) and diffusion matrix ``B`` (d x m)."""

    A: np.ndarray
    B: np.ndarray
    rel_tol: float = DEFAULT_RANK_TOL
    labels: tuple = field(default=())

    @property
    def d(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @cached_property
    def filt(self):
        return filtration(self, self.rel_tol)

    def same_as(self, other):
        return (np.array_equal(self.A, other.A) and np.array_equal(self.B, other.B)
                and self.rel_tol == other.rel_tol)


@dataclass(frozen=True, eq=False)
class Filtration:
    n: int
    dims: tuple  # d_1 < ... < d_n = d
    basis: np.ndarray  # orthogonal; first d_k columns span E_k

    @property
    def levels(self):
        """Level index (1-based) of every adapted coordinate."""
        return level_index(self.dims)

    def block(self, k):
        """Slice of coordinates belonging to level ``k`` (1-based)."""
        lo = self.dims[k - 2] if k > 1 else 0
        return slice(lo, self.dims[k - 1])


@dataclass(frozen=True, eq=False)
class UBlocks:
    blocks: tuple  # u_1, ..., u_n with u_k of shape (d_k - d_{k-1}) x m

    @property
    def n(self):
        return len(self.blocks)

    @property
    def dims(self):
        return tuple(np.cumsum([u.shape[0] for u in self.blocks]).tolist())

    @property
    def m(self):
        return self.blocks[0].shape[1]


def level_index(dims):
    levels = np.empty(dims[-1], dtype=int)
    lo = 0
    for k, hi in enumerate(dims, start=1):
        levels[lo:hi] = k
        lo = hi
    return levels


def controllability_matrix(A, B, blocks=None):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    blocks = A.shape[0] if blocks is None else blocks
    cols = [B]
    for _ in range(blocks - 1):
        cols.append(A @ cols[-1])
    return np.hstack(cols)


def build_model(A, B, rel_tol=DEFAULT_RANK_TOL, labels=()):
    """Validate (A, B) and confirm the Kalman rank condition.

    Raises :class:`ShapeMismatch` for inconsistent shapes and
    :class:`NotControllable` (carrying the achieved rank) when
    ``rank[B, AB, ..., A^{d-1}B] < d``.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[0] != A.shape[1]:
        raise ShapeMismatch(f"A must be square, got shape {A.shape}")
    if B.shape[0] != A.shape[0]:
        raise ShapeMismatch(f"B must have d = {A.shape[0]} rows, got {B.shape[0]}")
    C = controllability_matrix(A, B)
    rank = numerical_rank(C, rel_tol).rank
    if rank < A.shape[0]:
        raise NotControllable(rank, A.shape[0])
    A.setflags(write=False)
    B.setflags(write=False)
    return ModelSpec(A, B, rel_tol, tuple(labels))


def _standard_basis_adapted(A, B, dims):
    d = A.shape[0]
    block = B
    for dk in dims:
        if np.any(block[dk:] != 0):
            return False
        block = A @ block
    return dims[-1] == d


def filtration(spec, rel_tol=None):
    """Adapted orthonormal basis and dimension ladder of ``E_1 < ... < E_n``.

    Level ``k`` directions are the part of ``A`` applied to the level
    ``k-1`` directions that is orthogonal to ``E_{k-1}``; ranks are decided
    by :func:`numerical_rank`.  If the coordinate axes are already adapted
    the identity is returned.
    """
    rel_tol = spec.rel_tol if rel_tol is None else rel_tol
    A, B, d = spec.A, spec.B, spec.d
    info = numerical_rank(B, rel_tol)
    basis = info.basis
    new = basis
    dims = [info.rank]
    while dims[-1] < d:
        if len(dims) >= d:
            raise NotControllable(dims[-1], d)
        cand = A @ new
        scale = float(np.max(np.linalg.norm(cand, axis=0))) if cand.size else 0.0
        resid = cand - basis @ (basis.T @ cand)
        resid -= basis @ (basis.T @ resid)
        if scale == 0.0:
            raise NotControllable(dims[-1], d)
        step = numerical_rank(resid, rel_tol, scale=scale)
        if step.rank == 0:
            raise NotControllable(dims[-1], d)
        new = step.basis
        basis = np.column_stack([basis, new])
        dims.append(dims[-1] + step.rank)
    if _standard_basis_adapted(A, B, dims):
        basis = np.eye(d)
    else:
        # one extra orthogonalisation pass keeps basis.T @ basis = I tight
        q, r = np.linalg.qr(basis)
        basis = q * np.sign(np.diag(r))
    basis.setflags(write=False)
    return Filtration(len(dims), tuple(dims), basis)


def adapted(spec, filt=None):
    """``(A, B)`` expressed in the adapted basis."""
    Q = (filt or spec.filt).basis
    return Q.T @ spec.A @ Q, Q.T @ spec.B


def u_blocks(spec, filt=None):
    """Leading small-eps coefficients of ``e^{eps r A} B`` per filtration level.

    ``u_k`` is the level-``k`` row block of ``Q^T A^{k-1} B`` divided by
    ``(k-1)!``.
    """
    filt = filt or spec.filt
    Q = filt.basis
    blocks = []
    power = spec.B
    for k in range(1, filt.n + 1):
        u = (Q.T @ power)[filt.block(k)] / factorial(k - 1)
        u.setflags(write=False)
        blocks.append(u)
        power = spec.A @ power
    return UBlocks(tuple(blocks))


def principal_part(spec, filt=None):
    """Keep only the first subdiagonal blocks of ``A`` in the adapted basis."""
    filt = filt or spec.filt
    A_ad, _ = adapted(spec, filt)
    lev = filt.levels
    mask = lev[:, None] == lev[None, :] + 1
    return np.where(mask, A_ad, 0.0)


def adjoint_power(spec, k):
    """Coefficient matrix ``(-1)^k A^k B`` of the iterated drift brackets."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return (-1) ** k * np.linalg.matrix_power(spec.A, k) @ spec.B


def scaled_pair(spec, eps, filt=None):
    """Model conjugated by the small-time scaling, in the adapted basis.

    Returns ``(eps * D^{-1} A D, D^{-1} B)`` with ``D = diag(eps^{k-1})``.
    Entries of ``A`` more than one level below the diagonal and rows of
    ``B`` outside level 1 vanish in exact arithmetic and are set to zero, so
    the pair is a polynomial in ``eps`` that tends to ``(principal_part, B)``.
    """
    filt = filt or spec.filt
    A_ad, B_ad = adapted(spec, filt)
    lev = filt.levels
    gap = lev[:, None] - lev[None, :]
    A_s = np.where(gap <= 1, A_ad, 0.0) * float(eps) ** (1 - gap).clip(min=0)
    B_s = np.where((lev == 1)[:, None], B_ad, 0.0)
    return A_s, B_s
