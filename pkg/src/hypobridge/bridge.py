"""Gaussian laws of the diffusion and of its bridge, with exact grid sampling.

The process ``x_t = e^{eps t A} x + e^{eps t A} int_0^t e^{-eps s A} sqrt(eps) B dW``
is Gaussian with covariance ``eps e^{eps t1 A} Gamma_t1 e^{eps t2 A^T}`` for
``t1 <= t2``.  Its bridge to ``y`` at time 1 is ``z_t = x_t - alpha_t (x_1 - y)``.

Covariances are assembled in the level-scaled coordinates of
:func:`hypobridge.model.scaled_pair` and mapped back with the exact similarity
``Q D (.) D Q^T``, which avoids cancellation between terms of very different
size when ``eps`` is small.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadGrid, BadTimeOrder
from .gramian import _check_eps_t, _vector, alpha_from, gramian, phi_path, van_loan
from .matcore import as_matrix, chol_psd, expm
from .model import scaled_pair


def path_normals(seed, n_paths, size):
    """Standard normals of shape ``(n_paths, size)``, one substream per path.

    Row ``i`` depends only on ``(seed, i)``, so any split of the paths across
    workers reproduces the serial draw.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    children = np.random.SeedSequence(seed).spawn(n_paths)
    out = np.empty((n_paths, size))
    for i, child in enumerate(children):
        out[i] = np.random.Generator(np.random.PCG64(child)).standard_normal(size)
    return out


def _strict_grid(grid, allow_zero=False):
    g = np.atleast_1d(np.asarray(grid, dtype=float))
    if g.ndim != 1 or g.size == 0:
        raise BadGrid("grid must be a non-empty 1-D sequence")
    lo_ok = g[0] >= 0 if allow_zero else g[0] > 0
    if not lo_ok or g[-1] > 1 or np.any(np.diff(g) <= 0):
        raise BadGrid("grid must be strictly increasing in (0, 1]")
    return g


def pair_bridge_cov(F, G, grid):
    """Joint bridge covariance on ``grid`` for ``dx = F x dt + G dW`` pinned at t = 1.

    Returns the ``(N d) x (N d)`` matrix of blocks
    ``c(t_i, t_j) - a_i c(1, t_j) - c(t_i, 1) a_j^T + a_i c(1, 1) a_j^T``.
    """
    d = F.shape[0]
    N = len(grid)
    Q = G @ G.T
    E1, G1 = van_loan(F, Q, 1.0)
    P1 = E1 @ G1
    E = np.empty((N, d, d))
    P = np.empty((N, d, d))
    alphas = np.empty((N, d, d))
    for i, t in enumerate(grid):
        E[i], Gt = van_loan(F, Q, t)
        P[i] = E[i] @ Gt
        alphas[i] = np.eye(d) if t == 1 else alpha_from(E[i], Gt, E1, G1)
    # c(t_i, t_j) = P_i E_j^T for t_i <= t_j
    cx = np.einsum("iab,jcb->ijac", P, E)
    lower = np.tril_indices(N, -1)
    cx[lower] = np.swapaxes(cx[lower[1], lower[0]], -1, -2)
    R = np.einsum("iab,cb->iac", P, E1)  # c(t_i, 1)
    S = P1 @ E1.T  # c(1, 1)
    C = (cx
         - np.einsum("iab,jcb->ijac", alphas, R)
         - np.einsum("iab,jcb->ijac", R, alphas)
         + np.einsum("iab,bc,jdc->ijad", alphas, S, alphas))
    pinned = np.asarray(grid) == 1
    C[pinned] = 0.0  # z_1 = y exactly
    C[:, pinned] = 0.0
    C = C.transpose(0, 2, 1, 3).reshape(N * d, N * d)
    return 0.5 * (C + C.T)


@dataclass(frozen=True, eq=False)
class ProcessLaw:
    """Law of the unconditioned diffusion started at ``x``."""

    spec: object
    eps: float
    x: np.ndarray

    def mean(self, t):
        return expm(self.eps * t * self.spec.A) @ self.x

    def cov(self, t1, t2):
        if t1 <= t2:
            return process_cov(self.spec, self.eps, t1, t2)
        return process_cov(self.spec, self.eps, t2, t1).T


def process_law(spec, eps, x=None):
    return ProcessLaw(spec, eps, _vector(x, spec.d, "x"))


def process_cov(spec, eps, t1, t2):
    """``cov(x_t1, x_t2) = eps e^{eps t1 A} Gamma_t1 e^{eps t2 A^T}`` for ``t1 <= t2``."""
    if not 0.0 <= t1 <= t2 <= 1.0:
        raise BadTimeOrder(f"need 0 <= t1 <= t2 <= 1, got t1={t1}, t2={t2}")
    g = gramian(spec, eps, t1)
    return eps * g.exp_tA @ g.gamma @ expm(eps * t2 * spec.A).T


@dataclass(frozen=True, eq=False)
class BridgeLaw:
    spec: object
    eps: float
    x: np.ndarray
    y: np.ndarray
    grid: np.ndarray
    mean_path: np.ndarray  # (N, d)
    joint_cov: np.ndarray  # (N d, N d)

    def block(self, i, j):
        d = self.spec.d
        return self.joint_cov[i * d:(i + 1) * d, j * d:(j + 1) * d]


def bridge_cov(spec, eps, grid):
    """Joint covariance of the bridge on ``grid``; independent of ``x`` and ``y``."""
    _check_eps_t(eps, 1.0)
    grid = _strict_grid(grid)
    A_s, B_s = scaled_pair(spec, eps)
    C_s = pair_bridge_cov(A_s, B_s, grid)
    filt = spec.filt
    s = np.tile(float(eps) ** (filt.levels - 1), len(grid))
    T = np.kron(np.eye(len(grid)), filt.basis)
    C = eps * (T @ (s[:, None] * C_s * s[None, :]) @ T.T)
    return 0.5 * (C + C.T)


def bridge_law(spec, eps, x, y, grid):
    """Mean path and joint grid covariance of the process conditioned on ``x_1 = y``."""
    grid = _strict_grid(grid)
    x = _vector(x, spec.d, "x")
    y = _vector(y, spec.d, "y")
    mean = phi_path(spec, eps, x, y, grid)
    return BridgeLaw(spec, eps, x, y, grid, mean, bridge_cov(spec, eps, grid))


def sample_bridge(law, n_paths, seed, jitter=0.0):
    """Exact samples ``mean_path + L xi`` of shape ``(n_paths, N, d)``."""
    L = chol_psd(law.joint_cov, jitter)
    xi = path_normals(seed, n_paths, L.shape[0])
    paths = law.mean_path.ravel()[None, :] + xi @ L.T
    return paths.reshape(n_paths, len(law.grid), law.spec.d)


def sample_unconditioned(spec, eps, x, grid, n_paths, seed):
    """Exact samples of the diffusion at the grid times, shape ``(n_paths, N, d)``.

    Steps between consecutive grid points (starting from time 0) use the
    transition ``e^{eps h A} state + noise`` with noise covariance
    ``eps e^{eps h A} Gamma_h e^{eps h A^T}``.
    """
    grid = _strict_grid(grid, allow_zero=True)
    d = spec.d
    x = _vector(x, d, "x")
    steps = np.diff(np.concatenate([[0.0], grid]))
    xi = path_normals(seed, n_paths, len(grid) * d).reshape(n_paths, len(grid), d)
    out = np.empty((n_paths, len(grid), d))
    state = np.tile(x, (n_paths, 1))
    for j, h in enumerate(steps):
        if h > 0:
            g = gramian(spec, eps, h)
            step_cov = eps * g.exp_tA @ g.gamma @ g.exp_tA.T
            L = chol_psd(step_cov)
            state = state @ g.exp_tA.T + xi[:, j] @ L.T
        out[:, j] = state
    return out


def sample_cov(samples, mean=None):
    """Second moments about ``mean`` (known) or the sample mean, flattened per path."""
    X = as_matrix(samples.reshape(samples.shape[0], -1), "samples")
    mu = X.mean(axis=0) if mean is None else np.ravel(mean)
    Xc = X - mu
    ddof = 1 if mean is None else 0
    return Xc.T @ Xc / (X.shape[0] - ddof)
