"""Controllability Gramian, conditioning matrix alpha, and the minimal-like path.

The Gramian ``Gamma_t = int_0^t e^{-eps s A} B B^T e^{-eps s A^T} ds`` is read
off one augmented matrix exponential (Van Loan).  By default it is evaluated
on the scaled pair of :func:`hypobridge.model.scaled_pair`, which is the same
matrix up to the exact similarity ``Gamma = Q D Gamma_scaled D Q^T``; this keeps
every entry accurate to relative precision even when ``eps`` is small and the
entries span many orders of magnitude.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SingularGramian
from .matcore import as_matrix, expm
from .model import scaled_pair

_COND_LIMIT = 1e14


@dataclass(frozen=True, eq=False)
class GramianSet:
    eps: float
    t: float
    gamma: np.ndarray  # Gamma_t^eps
    exp_tA: np.ndarray  # e^{eps t A}


def _check_eps_t(eps, t):
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")


def van_loan(A, Q, t):
    """Return ``(e^{tA}, int_0^t e^{-sA} Q e^{-sA^T} ds)`` from one exponential.

    The upper-right block of ``exp(t [[-A, Q], [0, A^T]])`` equals
    ``int_0^t e^{-(t-s)A} Q e^{sA^T} ds``; multiplying on the right by the
    inverse of the lower-right block ``e^{tA^T}`` gives the Gramian.
    """
    d = A.shape[0]
    Z = np.zeros((2 * d, 2 * d))
    Z[:d, :d] = -A
    Z[:d, d:] = Q
    Z[d:, d:] = A.T
    F = expm(t * Z)
    F22 = F[d:, d:]
    G = np.linalg.solve(F22.T, F[:d, d:].T).T
    return F22.T, 0.5 * (G + G.T)


def _scaling(spec, eps):
    filt = spec.filt
    return filt.basis, float(eps) ** (filt.levels - 1)


def scaled_gramian(spec, eps, t):
    """``(e^{t A_s}, Gamma_s(t))`` for the scaled pair ``(A_s, B_s)``.

    In the adapted basis ``D^{-1} e^{eps t A} Gamma_t D^{-1}`` equals
    ``e^{t A_s} Gamma_s(t)``.
    """
    A_s, B_s = scaled_pair(spec, eps)
    return van_loan(A_s, B_s @ B_s.T, t)


def gramian(spec, eps, t, balanced=True):
    """Gamma_t^eps together with ``e^{eps t A}``.

    With ``balanced=False`` the augmented exponential is applied to
    ``(eps A, B)`` directly, without the level scaling.
    """
    _check_eps_t(eps, t)
    exp_tA = expm(eps * t * spec.A)
    if t == 0:
        return GramianSet(eps, t, np.zeros((spec.d, spec.d)), exp_tA)
    if balanced:
        Q, s = _scaling(spec, eps)
        _, G_s = scaled_gramian(spec, eps, t)
        gamma = Q @ (s[:, None] * G_s * s[None, :]) @ Q.T
        gamma = 0.5 * (gamma + gamma.T)
    else:
        _, gamma = van_loan(eps * spec.A, spec.B @ spec.B.T, t)
    return GramianSet(eps, t, gamma, exp_tA)


def _solve_right(X, M):
    """``X @ inv(M)``, raising :class:`SingularGramian` if ``M`` is singular."""
    try:
        cond = np.linalg.cond(M)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not cond < _COND_LIMIT:
        raise SingularGramian(f"Gramian is numerically singular (cond {cond:.2e})")
    return np.linalg.solve(M.T, X.T).T


def gramian_solve_right(X, G):
    """``X @ inv(G)`` for a symmetric positive definite Gramian ``G``.

    ``G`` is equilibrated to unit diagonal first; the condition check and
    the solve act on the equilibrated matrix, whose condition number can be
    many orders smaller (iterated Kolmogorov, d = 8: 7e15 -> 6e9).
    """
    diag = np.diag(G)
    if not np.all(diag > 0):
        raise SingularGramian("Gramian has a non-positive diagonal entry")
    s = 1.0 / np.sqrt(diag)
    Ge = G * np.outer(s, s)
    try:
        cond = np.linalg.cond(Ge)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not cond < _COND_LIMIT:
        raise SingularGramian(f"Gramian is numerically singular (cond {cond:.2e})")
    return np.linalg.solve(Ge, (X * s).T).T * s


def alpha_from(E_t, G_t, E_1, G_1):
    """``e^{tA} Gamma_t Gamma_1^{-1} e^{-A}`` from Van Loan outputs."""
    Y = gramian_solve_right(E_t @ G_t, G_1)
    return np.linalg.solve(E_1.T, Y.T).T


def scaled_alpha(spec, eps, t):
    """``D^{-1} alpha_t^eps D`` in the adapted basis.

    This is the conditioning matrix of the scaled pair at unit noise scale;
    it stays bounded as ``eps -> 0`` and tends to ``J_t V J_t V^{-1}``.
    """
    _check_eps_t(eps, t)
    d = spec.d
    if t == 0:
        return np.zeros((d, d))
    if t == 1:
        return np.eye(d)
    E_t, G_t = scaled_gramian(spec, eps, t)
    E_1, G_1 = scaled_gramian(spec, eps, 1.0)
    return alpha_from(E_t, G_t, E_1, G_1)


def alpha(spec, eps, t):
    """alpha_t = e^{eps t A} Gamma_t Gamma_1^{-1} e^{-eps A}; zero at t = 0, identity at t = 1."""
    Q, s = _scaling(spec, eps)
    g = scaled_alpha(spec, eps, t)
    return Q @ (s[:, None] * g / s[None, :]) @ Q.T


def _vector(v, d, name):
    arr = as_matrix(np.zeros(d) if v is None else v, name).ravel()
    if arr.shape != (d,):
        raise ValueError(f"{name} must have length {d}")
    return arr


def _grid(grid):
    g = np.atleast_1d(np.asarray(grid, dtype=float))
    if g.ndim != 1 or np.any(g < 0) or np.any(g > 1) or np.any(np.diff(g) < 0):
        raise ValueError("grid must be a sorted sequence in [0, 1]")
    return g


def phi_path(spec, eps, x, y, grid):
    """Minimal-like path ``e^{eps t A} x + alpha_t (y - e^{eps A} x)`` on ``grid``.

    Returns an array of shape ``(len(grid), d)``.
    """
    x = _vector(x, spec.d, "x")
    y = _vector(y, spec.d, "y")
    target = y - expm(eps * spec.A) @ x
    rows = [expm(eps * t * spec.A) @ x + alpha(spec, eps, t) @ target
            for t in _grid(grid)]
    return np.array(rows).reshape(-1, spec.d)


def hamiltonian_verify(spec, eps, x, y, steps=1000):
    """Max distance between the Hamiltonian flow projection and ``phi_path``.

    Integrates ``q' = eps A q + B B^T p``, ``p' = -eps A^T p`` with RK4 from
    ``q_0 = x`` and the covector ``p_0 = Gamma_1^{-1}(e^{-eps A} y - x)`` that
    steers the flow to ``q_1 = y``.

    The system is integrated in the level-scaled coordinates
    ``q = Q D q_s``, ``p = Q D^{-1} p_s``, where it becomes the same
    Hamiltonian system for the scaled pair at unit noise.  This is an exact
    linear change of variables; it keeps ``p_0`` well conditioned when
    ``Gamma_1`` spans many orders of magnitude.
    """
    if steps < 100:
        raise ValueError("steps must be at least 100")
    _check_eps_t(eps, 1.0)
    d = spec.d
    x = _vector(x, d, "x")
    y = _vector(y, d, "y")
    Q, s = _scaling(spec, eps)
    A_s, B_s = scaled_pair(spec, eps)
    xs = (Q.T @ x) / s
    ys = (Q.T @ y) / s
    _, G_1 = van_loan(A_s, B_s @ B_s.T, 1.0)
    rhs = expm(-A_s) @ ys - xs
    p0 = gramian_solve_right(rhs[None, :], G_1)[0]

    H = np.zeros((2 * d, 2 * d))
    H[:d, :d] = A_s
    H[:d, d:] = B_s @ B_s.T
    H[d:, d:] = -A_s.T
    h = 1.0 / steps
    z = np.concatenate([xs, p0])
    qs = [z[:d].copy()]
    for _ in range(steps):
        k1 = H @ z
        k2 = H @ (z + 0.5 * h * k1)
        k3 = H @ (z + 0.5 * h * k2)
        k4 = H @ (z + h * k3)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        qs.append(z[:d].copy())
    q = (np.array(qs) * s) @ Q.T
    grid = np.linspace(0.0, 1.0, steps + 1)
    phi = phi_path(spec, eps, x, y, grid)
    return float(np.max(np.linalg.norm(q - phi, axis=1)))
