"""Mod-1 arithmetic on the d-torus, rigid rotations and unimodular changes of variables.

Coordinates are in revolutions: a point of T^d is a vector of d reals in [0, 1).
"""

import warnings
from fractions import Fraction

import numpy as np

from .errors import DomainError, UsageError

__all__ = [
    "IrrationalityWarning",
    "mod1",
    "circle_distance",
    "torus_distance",
    "two_sum",
    "two_prod",
    "rigid_orbit",
    "rational_approximation",
    "check_irrational",
    "integer_determinant",
    "apply_unimodular",
    "shear_upper",
    "shear_lower",
    "representation_samples",
]

_SPLITTER = 134217729.0  # 2**27 + 1


class IrrationalityWarning(UserWarning):
    """A rotation coordinate is numerically indistinguishable from a small-denominator rational."""


def mod1(x):
    """Fractional part in [0, 1). Works on scalars and arrays."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("mod1 requires finite input")
    r = arr - np.floor(arr)
    # x slightly below an integer can round up to exactly 1.0
    r = np.where(r >= 1.0, 0.0, r)
    if r.ndim == 0:
        return float(r)
    return r


def circle_distance(a, b):
    """Distance on S^1 = R/Z between revolution-valued arguments."""
    d = np.abs(mod1(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))
    return np.minimum(d, 1.0 - d)


def torus_distance(a, b):
    """L1 sum of per-coordinate circle distances; translation invariant."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape[-1] != b.shape[-1]:
        raise UsageError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return np.sum(circle_distance(a, b), axis=-1)


def two_sum(a, b):
    """Error-free transformation: a + b == s + e exactly (Knuth)."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    """Error-free product: a * b == p + e exactly (Dekker / Veltkamp split)."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def rigid_orbit(rho, theta0, n_steps, rho_lo=None):
    """Orbit theta_n = theta0 + n * rho mod 1 for n = 0..n_steps.

    Each point is computed directly from n, so the error stays at a few ulp
    instead of growing with n as chained addition would. ``rho_lo`` is an
    optional low-order correction so that ``rho + rho_lo`` represents the
    rotation vector to double-double accuracy.

    Returns an array of shape (n_steps + 1, d).
    """
    if n_steps < 1:
        raise UsageError("n_steps must be >= 1")
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    if rho.shape != theta0.shape:
        raise UsageError("rho and theta0 must have the same dimension")
    lo = np.zeros_like(rho) if rho_lo is None else np.atleast_1d(np.asarray(rho_lo, dtype=float))
    n = np.arange(n_steps + 1, dtype=float)[:, None]
    p, e = two_prod(n, rho[None, :])
    p = p - np.floor(p)
    s, e2 = two_sum(p, theta0[None, :])
    return mod1(s + (e + e2 + n * lo[None, :]))


def rational_approximation(x, max_denominator=1000):
    """Best rational approximation with bounded denominator (continued fractions)."""
    return Fraction(float(x)).limit_denominator(max_denominator)


def check_irrational(rho, max_denominator=1000, tol=1e-12):
    """Advisory check. Returns True when no coordinate is within ``tol`` of p/q, q <= max_denominator.

    Irrationality cannot be decided in floating point; this only rejects
    obviously rational rotation vectors and warns about them.
    """
    ok = True
    for c in np.atleast_1d(np.asarray(rho, dtype=float)):
        frac = rational_approximation(c, max_denominator)
        if abs(c - float(frac)) < tol:
            warnings.warn(f"rotation coordinate {c!r} matches {frac} within {tol:g}", IrrationalityWarning)
            ok = False
    return ok


def integer_determinant(matrix):
    """Exact determinant of an integer matrix (fraction-free Bareiss elimination)."""
    m = [[int(v) for v in row] for row in matrix]
    n = len(m)
    if any(len(row) != n for row in m):
        raise UsageError("matrix must be square")
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def apply_unimodular(A, rho):
    """Rotation vector in the coordinates theta' = A theta, i.e. A rho mod 1."""
    A = np.asarray(A)
    if not np.issubdtype(A.dtype, np.integer):
        if not np.all(A == np.round(A)):
            raise UsageError("unimodular matrix must have integer entries")
        A = A.astype(np.int64)
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if A.shape != (rho.size, rho.size):
        raise UsageError(f"matrix shape {A.shape} does not match dimension {rho.size}")
    det = integer_determinant(A)
    if abs(det) != 1:
        raise UsageError(f"|det A| must be 1, got {det}")
    return mod1(A.astype(float) @ rho)


def shear_upper(m):
    """B_m = [[1, m], [0, 1]]."""
    return np.array([[1, m], [0, 1]], dtype=np.int64)


def shear_lower(k):
    """C_k = [[1, 0], [k, 1]]."""
    return np.array([[1, 0], [k, 1]], dtype=np.int64)


def representation_samples(rho, m_range, k_range):
    """Points mod1(B_m C_k rho) for |m| <= m_range, |k| <= k_range (d = 2 only).

    These are all rotation vectors of the same torus map in other coordinates;
    as the ranges grow they fill T^2 densely.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if rho.size != 2:
        raise UsageError("representation_samples supports d = 2 only")
    check_irrational(rho)
    out = []
    for m in range(-m_range, m_range + 1):
        for k in range(-k_range, k_range + 1):
            out.append(apply_unimodular(shear_upper(m) @ shear_lower(k), rho))
    return np.unique(np.array(out), axis=0)
