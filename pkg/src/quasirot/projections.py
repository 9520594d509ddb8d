"""Example projections of tori into the plane and angle extraction.

Planar points are handled as arrays of shape (..., 2). Angles are in
revolutions, in [0, 1).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePointError, UndersampledError, UsageError
from .torus import mod1

__all__ = [
    "FourierCurve",
    "ReferencePoint",
    "FISH",
    "FLOWER",
    "SQUARE",
    "eval_fourier",
    "angle_from_reference",
    "unwrap_increments",
    "winding_number",
    "curve_winding_number",
    "winding_grid",
    "find_reference_points",
    "delay_pair_series",
    "torus_map_3d",
    "tilted_radial_projection",
    "loop_degrees",
]

_DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class FourierCurve:
    """Closed curve theta -> sum_k c_k exp(2 pi i k theta) in the complex plane."""

    coefficients: tuple  # ((k, complex), ...)

    def __post_init__(self):
        if not self.coefficients:
            raise UsageError("a Fourier curve needs at least one coefficient")
        for k, c in self.coefficients:
            if int(k) != k or not np.isfinite(complex(c)):
                raise UsageError(f"bad coefficient {k}: {c}")

    @classmethod
    def from_dict(cls, coeffs):
        return cls(tuple(sorted((int(k), complex(v)) for k, v in coeffs.items())))

    def complex_value(self, theta):
        z = np.exp(2j * np.pi * np.asarray(theta, dtype=float))
        out = np.zeros(z.shape, dtype=complex)
        for k, c in self.coefficients:
            out = out + c * z**k
        return out


FISH = FourierCurve.from_dict({-1: 1.4 - 2j, 0: 4.1 + 1.34j, 1: -2 + 2.412j, 2: -2.5 - 1.752j})
FLOWER = FourierCurve.from_dict({1: 0.75, 6: 1.0})
# z -> z^2 on the unit circle: no reference point has winding number 1
SQUARE = FourierCurve.from_dict({2: 1.0})


@dataclass(frozen=True)
class ReferencePoint:
    x: float
    y: float
    expected_winding: int = None

    @property
    def point(self):
        return np.array([self.x, self.y])

    def check_off_curve(self, samples, tol=1e-9):
        pts = np.asarray(samples, dtype=float).reshape(-1, 2)
        dmin = np.min(np.hypot(pts[:, 0] - self.x, pts[:, 1] - self.y))
        if dmin <= tol:
            raise DegeneratePointError(f"reference point ({self.x}, {self.y}) lies on the sampled curve")
        return dmin


def _as_xy(P):
    if isinstance(P, ReferencePoint):
        return P.x, P.y
    x, y = P
    return float(x), float(y)


def eval_fourier(curve, theta):
    """Point(s) of the curve as (x, y) = (Re, Im)."""
    z = curve.complex_value(theta)
    return np.stack([z.real, z.imag], axis=-1)


def angle_from_reference(g, P):
    """Direction of g as seen from P, in revolutions in [0, 1)."""
    g = np.asarray(g, dtype=float)
    px, py = _as_xy(P)
    dx = g[..., 0] - px
    dy = g[..., 1] - py
    if np.any(np.hypot(dx, dy) <= _DEGENERATE_TOL):
        raise DegeneratePointError(f"observation coincides with reference point ({px}, {py})")
    return mod1(np.arctan2(dy, dx) / (2 * np.pi))


def unwrap_increments(angles):
    """Successive differences chosen in [-1/2, 1/2)."""
    a = np.asarray(angles, dtype=float)
    return mod1(np.diff(a) + 0.5) - 0.5


def winding_number(curve_samples, P, max_step=0.25):
    """Winding number of a closed, densely sampled curve around P.

    Samples are ordered along one period; the closing segment from the last
    sample back to the first is included (a repeated endpoint is dropped).
    """
    pts = np.asarray(curve_samples, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        raise UsageError("need at least 3 samples")
    if np.allclose(pts[0], pts[-1], rtol=0, atol=1e-12):
        pts = pts[:-1]
    phi = angle_from_reference(pts, P)
    inc = unwrap_increments(np.append(phi, phi[0]))
    if np.max(np.abs(inc)) >= max_step:
        raise UndersampledError(f"angular step {np.max(np.abs(inc)):.3f} rev; sample the curve more densely")
    total = float(np.sum(inc))
    w = round(total)
    if abs(total - w) >= 0.01:
        raise UndersampledError(f"winding sum {total:.4f} is not close to an integer; curve not closed?")
    return int(w)


def curve_winding_number(curve, P, n_samples=10_000, max_samples=2**22):
    """Winding number of a parametrized curve, doubling the sampling until steps are small."""
    n = n_samples
    while True:
        theta = np.arange(n) / n
        try:
            return winding_number(curve(theta) if callable(curve) else eval_fourier(curve, theta), P)
        except UndersampledError:
            n *= 2
            if n > max_samples:
                raise


def winding_grid(curve_samples, xs, ys):
    """Winding numbers on a grid of candidate reference points (NaN near the curve)."""
    pts = np.asarray(curve_samples, dtype=float).reshape(-1, 2)
    z = pts[:, 0] + 1j * pts[:, 1]
    zn = np.roll(z, -1)
    out = np.empty((len(ys), len(xs)))
    step = np.max(np.abs(zn - z))
    for i, y in enumerate(ys):
        P = np.asarray(xs) + 1j * y
        with np.errstate(divide="ignore", invalid="ignore"):  # points on the curve are masked below
            a = np.angle((zn[None, :] - P[:, None]) / (z[None, :] - P[:, None])) / (2 * np.pi)
        w = a.sum(axis=1)
        near = np.min(np.abs(z[None, :] - P[:, None]), axis=1) < 2 * step
        row = np.round(w)
        row[near] = np.nan
        out[i] = row
    return out


def find_reference_points(curve_samples, target, xs, ys):
    """Grid points whose winding number has absolute value ``target``."""
    grid = winding_grid(curve_samples, xs, ys)
    iy, ix = np.nonzero(np.abs(grid) == target)
    return np.stack([np.asarray(xs)[ix], np.asarray(ys)[iy]], axis=-1)


def delay_pair_series(scalar_series):
    """Planar points (s_{n-1}, s_n), n = 1..N-1, from a scalar series."""
    s = np.asarray(scalar_series, dtype=float)
    if s.ndim != 1 or s.size < 2:
        raise UsageError("delay pairs need a scalar series of length >= 2")
    return np.stack([s[:-1], s[1:]], axis=-1)


def torus_map_3d(gamma, theta, y):
    """Map (theta, y) in T^2 into R^3 by revolving the curve gamma about the f3 axis.

    f1 = (Re gamma(theta) + 2) cos(2 pi y), f2 = (Re gamma(theta) + 2) sin(2 pi y),
    f3 = Im gamma(theta).
    """
    g = gamma.complex_value(theta)
    radius = g.real + 2.0
    ang = 2 * np.pi * np.asarray(y, dtype=float)
    return np.stack([radius * np.cos(ang), radius * np.sin(ang), g.imag], axis=-1)


def tilted_radial_projection(f, alpha):
    """Tilt by ``alpha`` in the f2-f3 plane, then project to (r, f3).

    r is the distance from the rotated axis, sqrt(h1^2 + h2^2) with h = R_alpha f;
    the second coordinate is the untilted f3.
    """
    f = np.asarray(f, dtype=float)
    f1, f2, f3 = f[..., 0], f[..., 1], f[..., 2]
    h2 = np.cos(alpha) * f2 - np.sin(alpha) * f3
    return np.stack([np.hypot(f1, h2), f3], axis=-1)


def loop_degrees(projection, P, base=(0.0, 0.0)):
    """Winding numbers of a torus projection around P along the two generator loops.

    ``projection(theta, y)`` maps torus coordinates to planar points. The angle
    seen from P then has the form a . (theta, y) + periodic, with
    a = (degree along theta at fixed y, degree along y at fixed theta), so a
    rotation by rho has projection rate mod1(a . rho).
    """
    b0, b1 = base
    a1 = curve_winding_number(lambda t: projection(t, np.full_like(t, b1)), P)
    a2 = curve_winding_number(lambda t: projection(np.full_like(t, b0), t), P)
    return a1, a2
