"""The four worked example models, with their closed forms as callables.

``preset(name)`` returns a :class:`Preset` whose ``reference`` maps a quantity
name to a function of ``(eps, t)`` (or of ``t`` alone for eps-free limits),
so tests can sweep parameters densely instead of reading tables.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import wraps
from math import comb, factorial

import mpmath
import numpy as np

from .errors import UnknownPreset, UnsupportedDimension
from .fluct import hankel_v_inverse
from .model import build_model

NAMES = ("kolmogorov", "ou_area", "sec43", "iterated_kolmogorov")
ITERATED_MAX_D = 8

_E1 = np.array([[1.0], [0.0]])


@dataclass(frozen=True, eq=False)
class Preset:
    name: str
    spec: object
    reference: dict = field(default_factory=dict)


# Kolmogorov pair (W_t, int W): A^2 = 0 so every quantity is polynomial.

def _kol_exp(eps, r):
    return np.array([[1.0, 0.0], [eps * r, 1.0]])


def _kol_gamma(eps, t):
    return np.array([[t, -0.5 * eps * t**2], [-0.5 * eps * t**2, eps**2 * t**3 / 3.0]])


def _kol_exp_gamma(eps, t):
    return np.array([[t, -0.5 * eps * t**2], [0.5 * eps * t**2, -eps**2 * t**3 / 6.0]])


def _kol_alpha(eps, t):
    return np.array([[3 * t**2 - 2 * t, (6 * t - 6 * t**2) / eps],
                     [(t**3 - t**2) * eps, 3 * t**2 - 2 * t**3]])


def _kol_M(t):
    return np.array([[3 * t**2 - 2 * t, 6 * t - 6 * t**2],
                     [t**3 - t**2, 3 * t**2 - 2 * t**3]])


_KOL_V = np.array([[1.0, -0.5], [0.5, -1.0 / 6.0]])
_KOL_VINV = np.array([[-2.0, 6.0], [-6.0, 12.0]])


def _precise(fn):
    # printed closed forms cancel badly for small eps; evaluate at 40 digits
    @wraps(fn)
    def wrapper(*args):
        with mpmath.workdps(40):
            rows = fn(*(mpmath.mpf(a) for a in args))
            return np.array([[float(v) for v in row] for row in rows])
    return wrapper


# Ornstein-Uhlenbeck velocity paired with its area.

@_precise
def _ou_exp(eps, r):
    e = mpmath.exp(-eps * r)
    return ([[e, 0.0], [1.0 - e, 1.0]])


@_precise
def _ou_gamma(eps, t):
    e = mpmath.exp(eps * t)
    return ([
        [(e**2 - 1) / (2 * eps), -((e - 1) ** 2) / (2 * eps)],
        [-((e - 1) ** 2) / (2 * eps), (e**2 - 4 * e + 2 * eps * t + 3) / (2 * eps)],
    ])


@_precise
def _ou_exp_gamma(eps, t):
    ep, em = mpmath.exp(eps * t), mpmath.exp(-eps * t)
    return ([
        [(ep - em) / (2 * eps), -(ep + em - 2) / (2 * eps)],
        [(ep + em - 2) / (2 * eps), -(ep - em - 2 * eps * t) / (2 * eps)],
    ])


@_precise
def _ou_alpha(eps, t):
    E = mpmath.exp
    e = eps
    den_a = (E(e) - 1) * ((e - 2) * E(e) + e + 2)
    den_b = (e + 2) * E(-e) + e - 2
    a11 = (1 - E(-e * t)) * ((e - 1) * E(e * (1 + t)) + E(e * t)
                             + (e + 1) * E(e) - E(2 * e)) / den_a
    a12 = (E(-e) - E(-e * (1 - t)) - E(-e * t) + 1) / den_b
    a21 = (E(2 * e) - 1 + (e + 1) * E(e * (1 - t)) + E(e * t)
           + (e - 1) * E(e * (1 + t)) - e * t * (E(e) - 1) ** 2
           - 2 * e * E(e) - E(e * (2 - t))) / den_a
    a22 = (E(-e * t) - E(-e * (1 - t)) + (e * t + 1) * E(-e) + e * t - 1) / den_b
    return ([[a11, a12], [a21, a22]])


# Model with the same u-blocks as Kolmogorov but an O(1) correction to phi.

@_precise
def _sec43_exp(eps, r):
    em, e2 = mpmath.exp(-eps * r), mpmath.exp(2 * eps * r)
    return ([[em, 0.0], [(e2 - em) / 3.0, e2]])


@_precise
def _sec43_exp_gamma(eps, t):
    E = lambda s: mpmath.exp(s * eps * t)  # noqa: E731
    return ([
        [(E(1) - E(-1)) / (2 * eps), -(2 * E(-2) - 3 * E(-1) + E(1)) / (6 * eps)],
        [(2 * E(2) - 3 * E(1) + E(-1)) / (6 * eps),
         -(E(2) - 2 * E(1) + 2 * E(-1) - E(-2)) / (12 * eps)],
    ])


def _sec43_alpha_first_order(t):
    """Coefficients of the leading eps-correction of alpha, entrywise Laurent order (1, 0, 1, 1)."""
    return np.array([[2 * t**2 - 2 * t**3, 4 * t**3 - 4 * t],
                     [t**3 - t**2, 2 * t**3 - 2 * t**2]])


# Brownian motion with its first d-1 iterated time integrals.

def iterated_V(d):
    return np.array([[(-1) ** (j + 1) / factorial(i + j - 1) for j in range(1, d + 1)]
                     for i in range(1, d + 1)])


def iterated_M(d, t):
    """Double-sum closed form of ``J_t V J_t V^{-1}`` for the iterated model.

    The alternating sum is accumulated exactly in rationals (on the binary
    value of ``t``) and rounded once.
    """
    t = Fraction(float(t))
    out = np.zeros((d, d))
    for i in range(1, d + 1):
        for j in range(1, d + 1):
            total = Fraction(0)
            for l in range(1, d + 1):
                inner = sum(comb(d - l + k, j - 1) * comb(d + k - 1, k) for k in range(l))
                coef = ((-1) ** (d + j + l + 1) * factorial(l - 1) * factorial(j)
                        * comb(d - 1, l - 1) * comb(d + j - 1, j) * inner)
                total += Fraction(coef, factorial(i + l - 1)) * t ** (i + l - 1)
            out[i - 1, j - 1] = float(total)
    return out


def iterated_u_hat(d, r):
    return np.array([[r ** (i - 1) / factorial(i - 1)] for i in range(1, d + 1)])


def _shift(d):
    return np.eye(d, k=-1)


def _basis_vector(d):
    B = np.zeros((d, 1))
    B[0, 0] = 1.0
    return B


def _parse(name):
    if ":" in name:
        base, _, arg = name.partition(":")
        try:
            return base, int(arg)
        except ValueError:
            raise UnsupportedDimension(f"bad dimension in preset name {name!r}") from None
    return name, None


def preset(name, d=None):
    """Build a named example; ``iterated_kolmogorov`` takes ``d`` or ``name:d``."""
    base, parsed = _parse(name)
    d = parsed if d is None else d
    if base == "kolmogorov":
        spec = build_model([[0.0, 0.0], [1.0, 0.0]], _E1, labels=("position", "area"))
        ref = {"exp": _kol_exp, "gamma": _kol_gamma, "exp_gamma": _kol_exp_gamma,
               "alpha": _kol_alpha, "M": _kol_M, "V": lambda: _KOL_V.copy(),
               "Vinv": lambda: _KOL_VINV.copy()}
    elif base == "ou_area":
        spec = build_model([[-1.0, 0.0], [1.0, 0.0]], _E1, labels=("velocity", "area"))
        ref = {"exp": _ou_exp, "gamma": _ou_gamma, "exp_gamma": _ou_exp_gamma,
               "alpha": _ou_alpha, "M": _kol_M, "V": lambda: _KOL_V.copy(),
               "Vinv": lambda: _KOL_VINV.copy()}
    elif base == "sec43":
        spec = build_model([[-1.0, 0.0], [1.0, 2.0]], _E1)
        ref = {"exp": _sec43_exp, "exp_gamma": _sec43_exp_gamma,
               "alpha_first_order": _sec43_alpha_first_order, "M": _kol_M,
               "V": lambda: _KOL_V.copy(), "Vinv": lambda: _KOL_VINV.copy()}
    elif base == "iterated_kolmogorov":
        if d is None:
            d = 4
        if not 2 <= d <= ITERATED_MAX_D:
            raise UnsupportedDimension(
                f"iterated_kolmogorov needs 2 <= d <= {ITERATED_MAX_D}, got {d}")
        spec = build_model(_shift(d), _basis_vector(d))
        ref = {"V": lambda: iterated_V(d), "Vinv": lambda: hankel_v_inverse(d),
               "M": lambda t: iterated_M(d, t), "u_hat": lambda r: iterated_u_hat(d, r)}
        base = f"iterated_kolmogorov:{d}"
    else:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(NAMES)}")
    return Preset(base, spec, ref)
