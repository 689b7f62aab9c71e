"""Small-time fluctuations of the bridge and their Gaussian limit.

With ``D_eps = diag(eps^{k-1})`` and ``J_t = diag(t^{k-1/2})`` (``k`` the
filtration level of each adapted coordinate) the rescaled fluctuations
``eps^{-1/2} D_eps^{-1} (z_t - phi_t)`` converge to

    F_t = int_0^t U(t-s) dW - J_t V J_t V^{-1} int_0^1 U(1-s) dW,

where ``U(r)`` stacks ``r^{k-1} u_k`` and ``V`` is the block matrix built from
the u-blocks by :func:`v_matrix`.
"""

import json
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np

from .bridge import pair_bridge_cov, path_normals, process_cov
from .errors import BadTimeOrder, IllConditioned
from .gramian import gramian, phi_path, scaled_alpha
from .matcore import chol_psd
from .model import level_index, scaled_pair, u_blocks


@dataclass(frozen=True)
class ScalingPair:
    dims: tuple

    @property
    def levels(self):
        return level_index(self.dims)

    def D(self, eps):
        return np.diag(float(eps) ** (self.levels - 1))

    def J(self, t):
        return np.diag(float(t) ** (self.levels - 0.5))


def scaling_for(ublocks):
    return ScalingPair(ublocks.dims)


def u_hat(ublocks, r):
    """Stack of ``r^{k-1} u_k``."""
    return np.vstack([float(r) ** k * u for k, u in enumerate(ublocks.blocks)])


def v_matrix(ublocks):
    """Block matrix with ``V_kl = (-1)^{l+1} u_k u_l^T (k-1)!(l-1)!/(k+l-1)!``."""
    rows = []
    for k, uk in enumerate(ublocks.blocks, start=1):
        row = []
        for l, ul in enumerate(ublocks.blocks, start=1):
            c = (-1) ** (l + 1) * factorial(k - 1) * factorial(l - 1) / factorial(k + l - 1)
            row.append(c * uk @ ul.T)
        rows.append(row)
    return np.block(rows)


def v_from_integral(ublocks, quad_order=32):
    """``int_0^1 U(1-s) U(-s)^T ds`` by Gauss-Legendre quadrature.

    The integrand is a polynomial of degree ``2(n-1)``, so any
    ``quad_order >= n`` integrates it exactly.
    """
    if quad_order < 20:
        raise ValueError("quad_order must be at least 20")
    nodes, weights = np.polynomial.legendre.leggauss(quad_order)
    s = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    return sum(wi * u_hat(ublocks, 1.0 - si) @ u_hat(ublocks, -si).T
               for si, wi in zip(s, w))


def v_inverse(V, cond_limit=1e12):
    """Inverse of ``V`` by an equilibrated solve with one refinement step.

    ``V`` is scaled symmetrically by ``|V_ii|^{-1/2}`` before the solve; the
    condition number of the scaled matrix is checked against
    ``cond_limit``.  The residual for the refinement step is formed in
    extended precision.
    """
    V = np.asarray(V, dtype=float)
    diag = np.abs(np.diag(V))
    if np.any(diag == 0):
        diag = np.sqrt(np.abs(V).max(axis=0) * np.abs(V).max(axis=1))
    if np.any(diag == 0):
        raise IllConditioned(np.inf, cond_limit)
    s = 1.0 / np.sqrt(diag)
    Vs = V * np.outer(s, s)
    cond = np.linalg.cond(Vs)
    if not cond <= cond_limit:
        raise IllConditioned(cond, cond_limit)
    n = V.shape[0]
    X = np.linalg.solve(Vs, np.eye(n)) * np.outer(s, s)
    resid = np.eye(n, dtype=np.longdouble) - V.astype(np.longdouble) @ X.astype(np.longdouble)
    X += np.linalg.solve(Vs, s[:, None] * resid.astype(float)) * s[:, None]
    return X


def hankel_v_inverse(d):
    """Closed-form inverse of ``V_ij = (-1)^{j+1}/(i+j-1)!`` (iterated Kolmogorov).

    Entries are accumulated in exact integer arithmetic.
    """
    if d < 1:
        raise ValueError("d must be positive")
    out = np.empty((d, d))
    for i in range(1, d + 1):
        for j in range(1, d + 1):
            inner = sum(comb(d - i + k, j - 1) * comb(d + k - 1, k) for k in range(i))
            val = (factorial(i - 1) * factorial(j) * comb(d - 1, i - 1)
                   * comb(d + j - 1, j) * inner)
            out[i - 1, j - 1] = (-1) ** (d + j) * val
    return out


def limit_mean_map(scaling, V, Vinv, t):
    """``M(t) = J_t V J_t V^{-1}``; ``M(0) = 0`` and ``M(1) = I``."""
    if t == 1:
        return np.eye(V.shape[0])
    J = scaling.J(t)
    return J @ V @ J @ Vinv


def _poly_overlap(p, q, a, b):
    # int_0^{min(a,b)} (a-s)^p (b-s)^q ds, written with nonnegative terms only
    if a > b:
        p, q, a, b = q, p, b, a
    gap = b - a
    return sum(comb(q, j) * gap ** (q - j) * a ** (p + j + 1) / (p + j + 1)
               for j in range(q + 1))


def limit_kernel(ublocks, a, b):
    """``K(a, b) = int_0^{min(a,b)} U(a-s) U(b-s)^T ds``, the covariance of the driving part."""
    rows = []
    for k, uk in enumerate(ublocks.blocks):
        rows.append([_poly_overlap(k, l, a, b) * uk @ ul.T
                     for l, ul in enumerate(ublocks.blocks)])
    return np.block(rows)


@dataclass(frozen=True, eq=False)
class FluctuationLaw:
    ublocks: object
    V: np.ndarray
    Vinv: np.ndarray
    scaling: ScalingPair = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "scaling", scaling_for(self.ublocks))

    @property
    def d(self):
        return self.V.shape[0]

    def M(self, t):
        return limit_mean_map(self.scaling, self.V, self.Vinv, t)

    def cov(self, t1, t2):
        """``cov(F_t1, F_t2)`` for any ``t1, t2`` in [0, 1]."""
        K = lambda a, b: limit_kernel(self.ublocks, a, b)  # noqa: E731
        M1, M2 = self.M(t1), self.M(t2)
        return (K(t1, t2) - K(t1, 1.0) @ M2.T - M1 @ K(1.0, t2)
                + M1 @ K(1.0, 1.0) @ M2.T)

    def grid_cov(self, grid):
        grid = np.asarray(grid, dtype=float)
        N, d = len(grid), self.d
        C = np.zeros((N * d, N * d))
        for i, ti in enumerate(grid):
            for j in range(i, N):
                blk = self.cov(ti, grid[j])
                C[i * d:(i + 1) * d, j * d:(j + 1) * d] = blk
                C[j * d:(j + 1) * d, i * d:(i + 1) * d] = blk.T
        return 0.5 * (C + C.T)


def fluctuation_law(ublocks):
    V = v_matrix(ublocks)
    return FluctuationLaw(ublocks, V, v_inverse(V))


def limit_cov(ublocks, scaling, t1, t2):
    """Limit covariance kernel ``cov(F_t1, F_t2)`` for ``0 <= t1 <= t2 <= 1``."""
    if not 0.0 <= t1 <= t2 <= 1.0:
        raise BadTimeOrder(f"need 0 <= t1 <= t2 <= 1, got t1={t1}, t2={t2}")
    V = v_matrix(ublocks)
    Vinv = v_inverse(V)
    law = FluctuationLaw(ublocks, V, Vinv)
    if scaling.dims != law.scaling.dims:
        raise ValueError("scaling does not match the u-block dimensions")
    return law.cov(t1, t2)


def rescaled_grid_cov(spec, eps, grid):
    """Joint covariance of ``eps^{-1/2} D^{-1} Q^T (z_t - phi_t)`` on ``grid``.

    Computed as the bridge covariance of the scaled pair at unit noise, which
    equals the rescaled covariance exactly.  Times equal to 0 give zero
    blocks.
    """
    grid = np.asarray(grid, dtype=float)
    d = spec.d
    pos = grid > 0
    A_s, B_s = scaled_pair(spec, eps)
    C = np.zeros((len(grid) * d, len(grid) * d))
    if np.any(pos):
        idx = np.concatenate([np.arange(i * d, (i + 1) * d) for i in np.flatnonzero(pos)])
        C[np.ix_(idx, idx)] = pair_bridge_cov(A_s, B_s, grid[pos])
    return C


def rescaled_cov(spec, eps, t1, t2):
    """``eps^{-1} D^{-1} cov(z_t1, z_t2) D^{-1}`` in the adapted basis."""
    if not 0.0 <= t1 <= t2 <= 1.0:
        raise BadTimeOrder(f"need 0 <= t1 <= t2 <= 1, got t1={t1}, t2={t2}")
    d = spec.d
    if t1 == t2:
        return rescaled_grid_cov(spec, eps, [t1])
    return rescaled_grid_cov(spec, eps, [t1, t2])[:d, d:]


def sample_limit(ublocks, scaling, grid, n_paths, seed, jitter=0.0):
    """Exact samples of ``F`` on ``grid``, shape ``(n_paths, N, d)``."""
    grid = np.asarray(grid, dtype=float)
    law = fluctuation_law(ublocks)
    if scaling.dims != law.scaling.dims:
        raise ValueError("scaling does not match the u-block dimensions")
    L = chol_psd(law.grid_cov(grid), jitter)
    xi = path_normals(seed, n_paths, L.shape[0])
    return (xi @ L.T).reshape(n_paths, len(grid), law.d)


def richardson_limit(values, ratio=2.0):
    """Extrapolate ``values[j] ~ f(h0 / ratio^j)`` to ``h -> 0`` for analytic ``f``."""
    table = [np.asarray(v, dtype=float) for v in values]
    for k in range(1, len(table)):
        factor = ratio**k - 1.0
        table = [table[j] + (table[j] - table[j - 1]) / factor
                 for j in range(1, len(table))]
    return table[-1]


def taylor_coefficients(fun, order, eps0=0.05, levels=6):
    """Taylor coefficients ``c_0 .. c_order`` at 0 of a matrix function analytic in eps.

    Each coefficient is extracted by Richardson extrapolation over
    ``eps0 / 2^j`` after removing the lower-order terms.
    """
    hs = [eps0 / 2.0**j for j in range(levels)]
    vals = [np.asarray(fun(h), dtype=float) for h in hs]
    coeffs = []
    for q in range(order + 1):
        rem = [(v - sum(c * h**i for i, c in enumerate(coeffs))) / h**q
               for v, h in zip(vals, hs)]
        coeffs.append(richardson_limit(rem))
    return coeffs


def alpha_expansion(spec, t, order=1, eps0=0.05, levels=6):
    """Taylor coefficients of ``D^{-1} alpha_t^eps D`` (adapted basis) in eps."""
    return taylor_coefficients(lambda e: scaled_alpha(spec, e, t), order, eps0, levels)


def alpha_laurent_coefficient(spec, t, powers, eps0=0.05, levels=6):
    """Coefficient of ``eps^p`` in each entry of ``alpha_t^eps`` (adapted basis).

    ``powers`` is a scalar or a d x d integer array of exponents ``p``.  The
    entry ``(i, j)`` of ``alpha`` equals ``eps^{k_i - k_j}`` times the same
    entry of ``D^{-1} alpha D``, so the requested Laurent coefficient is a
    Taylor coefficient of the scaled matrix.
    """
    d = spec.d
    powers = np.broadcast_to(np.asarray(powers, dtype=int), (d, d))
    lev = spec.filt.levels
    order = powers - (lev[:, None] - lev[None, :])
    top = int(order.max())
    coeffs = alpha_expansion(spec, t, max(top, 0), eps0, levels) if top >= 0 else []
    out = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            q = order[i, j]
            if q >= 0:
                out[i, j] = coeffs[q][i, j]
    return out


def conditional_mean(spec, eps, x, y, t):
    """``E[x_t | x_1 = y]`` from the joint Gaussian law of ``(x_t, x_1)``."""
    E = lambda s: gramian(spec, eps, s).exp_tA  # noqa: E731
    C_t1 = process_cov(spec, eps, t, 1.0)
    C_11 = process_cov(spec, eps, 1.0, 1.0)
    return E(t) @ x + C_t1 @ np.linalg.solve(C_11, y - E(1.0) @ x)


def uniform_grid(n=21):
    return np.linspace(0.0, 1.0, n)


def _block_norms(diff, N, d):
    blocks = diff.reshape(N, d, N, d).transpose(0, 2, 1, 3)
    return np.linalg.norm(blocks, ord=2, axis=(2, 3))


@dataclass
class ConvergenceReport:
    eps: list
    grid: list
    sup_cov_error: list
    sup_mean_error: list
    slope: object
    error_tables: list  # one N x N table of block errors per eps
    alpha_first_order: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "eps": self.eps,
            "grid": self.grid,
            "sup_cov_error": self.sup_cov_error,
            "sup_mean_error": self.sup_mean_error,
            "slope": self.slope,
            "alpha_first_order": self.alpha_first_order,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def table_rows(self):
        for e, table in zip(self.eps, self.error_tables):
            for i, t1 in enumerate(self.grid):
                for j, t2 in enumerate(self.grid):
                    yield e, t1, t2, table[i][j]


_EXACT_FLOOR = 1e-12


def fit_slope(eps_list, errors):
    """Least-squares slope of log(error) against log(eps); None if all errors vanish."""
    errors = np.asarray(errors, dtype=float)
    if np.all(errors < _EXACT_FLOOR):
        return None
    if np.any(errors <= 0):
        return float("nan")
    return float(np.polyfit(np.log(eps_list), np.log(errors), 1)[0])


def convergence_report(spec, eps_list, grid=None, x=None, y=None,
                       alpha_times=(0.25, 0.5, 0.75)):
    """Sup-grid distance between rescaled bridge and limit covariances, per eps.

    Also reports the sup over the grid of the rescaled gap between the
    Gaussian conditional mean and ``phi`` (zero up to rounding), the fitted
    log-log slope of the covariance errors, and the first-order Taylor
    coefficient of ``D^{-1} alpha_t D`` at ``alpha_times``.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3 or np.any(np.diff(eps_list) >= 0):
        raise ValueError("eps_list must hold at least 3 strictly decreasing values")
    grid = uniform_grid() if grid is None else np.asarray(grid, dtype=float)
    d, N = spec.d, len(grid)
    x = np.ones(d) if x is None else np.asarray(x, dtype=float)
    y = np.ones(d) if y is None else np.asarray(y, dtype=float)
    law = fluctuation_law(u_blocks(spec))
    limit = law.grid_cov(grid)
    Q = spec.filt.basis
    levels = spec.filt.levels

    cov_err, mean_err, tables = [], [], []
    for eps in eps_list:
        table = _block_norms(rescaled_grid_cov(spec, eps, grid) - limit, N, d)
        tables.append(table.tolist())
        cov_err.append(float(table.max()))
        phi = phi_path(spec, eps, x, y, grid)
        scale = eps ** -0.5 * eps ** -(levels - 1.0)
        gaps = [scale * (Q.T @ (conditional_mean(spec, eps, x, y, t) - phi[i]))
                for i, t in enumerate(grid) if 0 < t < 1]
        mean_err.append(float(max(np.linalg.norm(g) for g in gaps)) if gaps else 0.0)
    corrections = {str(t): alpha_expansion(spec, t, 1)[1].tolist() for t in alpha_times}
    return ConvergenceReport(eps_list, grid.tolist(), cov_err, mean_err,
                             fit_slope(eps_list, cov_err), tables, corrections)

