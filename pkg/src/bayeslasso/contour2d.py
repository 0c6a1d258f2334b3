"""
Exact p = 2, n = 1 computations: Z_2(s), the scalar profile z_2 and the
contour {r s : Z_2(s) = r^2} of the unit quasi-norm ball for y = 0.

With a = |As| and w = omega_lasso(s),

    Z_2(s) = exp(-y^2/2) a^-2 [1 - w M(w)],   M(w) = e^{w^2/2} sqrt(2 pi) (1 - F(w)),

and for y = 0, ||s||_1 = 1 this is z_2(b^2) with b = a:

    z_2(b^2) = b^-2 [1 - b^-1 M(1/b)]  =  int_0^inf exp(-b^2 r^2/2 - r) r dr.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .geometry import KERNEL_RTOL, GeometryContext, _as_vector
from .specfun import mills_ratio

__all__ = [
    "ContourPoint",
    "one_minus_x_mills",
    "z2",
    "Z2_direction",
    "kernel_segment",
    "contour_points",
    "polygon_area",
]

# switch to the asymptotic series of 1 - x M(x) beyond this point
_SERIES_FROM = 20.0


@dataclass(frozen=True)
class ContourPoint:
    x1: float
    x2: float
    direction_b: float
    kind: str = "solved_b"


def one_minus_x_mills(x: float) -> float:
    """1 - x M(x) with M the Mills ratio of the standard normal.

    Equals int_0^inf exp(-u^2/2 - x u) u du.  For large x the direct form
    cancels, so the alternating series sum_k (-1)^(k+1) (2k-1)!! x^(-2k)
    is used; its truncation error is below the first omitted term.
    """
    if x < _SERIES_FROM:
        return 1.0 - x * float(mills_ratio(x))
    inv = 1.0 / (x * x)
    term = inv
    total = 0.0
    k = 1
    while True:
        total += term
        nxt = -term * (2 * k + 1) * inv
        if abs(nxt) < 1e-17 * abs(total):
            return total
        term = nxt
        k += 1


def z2(b_squared: float) -> float:
    """z_2(b^2) = int_0^inf exp(-b^2 r^2/2 - r) r dr  (Z_2(s) for y = 0, ||s||_1 = 1, |As| = b)."""
    if not (math.isfinite(b_squared) and b_squared > 0):
        raise DomainError(f"b_squared must be positive, got {b_squared!r}")
    x = 1.0 / math.sqrt(b_squared)
    return x * x * one_minus_x_mills(x)


def Z2_direction(ctx: GeometryContext, s) -> float:
    """Z_2(s) = int_0^inf exp(-f(r s)) r dr for a 1 x 2 matrix, in closed form."""
    if ctx.p != 2 or ctx.n != 1:
        raise DimensionError("Z2_direction needs p = 2 and n = 1")
    v = _as_vector(ctx, s)
    if not np.any(v):
        raise DomainError("s must be nonzero")
    l1 = float(np.abs(v).sum())
    As = float(ctx.A[0] @ v)
    a = abs(As)
    y = float(ctx.y[0])
    if a <= KERNEL_RTOL * l1 * ctx.operator_norm_1_2:
        return math.exp(-0.5 * y * y) / (l1 * l1)
    w = (l1 - As * y) / a
    return math.exp(-0.5 * y * y) * one_minus_x_mills(w) / (a * a)


def _check_row(a1, a2):
    if a1 == 0 and a2 == 0:
        raise DomainError("the matrix (a1, a2) must be nonzero")


def kernel_segment(a1: float, a2: float):
    """End points +-(-a2, a1)/(|a1| + |a2|) of Ker(A) inside the ball (r_max = 1 there)."""
    _check_row(a1, a2)
    k = np.array([-a2, a1], dtype=float) / (abs(a1) + abs(a2))
    return k, -k


_EDGES = ((1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0))


def _level_directions(a1, a2, b):
    """Unit l1 vectors s with |a1 s1 + a2 s2| = b, one edge at a time."""
    found = []
    for e1, e2 in _EDGES:
        # s = (e1 t, e2 (1 - t)), t in [0, 1]; As = a2 e2 + (a1 e1 - a2 e2) t
        slope = a1 * e1 - a2 * e2
        if slope == 0:
            continue
        for target in (b, -b):
            t = (target - a2 * e2) / slope
            if -1e-14 <= t <= 1 + 1e-14:
                t = min(max(t, 0.0), 1.0)
                found.append((e1 * t, e2 * (1.0 - t)))
    unique = []
    for s in found:
        if all(abs(s[0] - u[0]) + abs(s[1] - u[1]) > 1e-12 for u in unique):
            unique.append(s)
    return unique


def contour_points(a1: float, a2: float, n_grid: int = 200) -> list[ContourPoint]:
    """Points of the contour Z_2(s) = r^2 of B((a1, a2), 0), sorted by angle.

    Three groups are emitted: the kernel segment end points, the extremal
    directions where |As| = max(|a1|, |a2|) scaled by sqrt(z_2(lambda^2)), and
    for each b on a grid in (0, lambda) the four points sqrt(z_2(b^2)) s with
    ||s||_1 = 1, |As| = b.  The b grid is the union of a log-spaced grid
    (dense toward the kernel) and a uniform one.
    """
    _check_row(a1, a2)
    if n_grid < 1:
        raise DomainError("n_grid must be positive")
    a1, a2 = float(a1), float(a2)
    lam = max(abs(a1), abs(a2))
    pts = []

    for k in kernel_segment(a1, a2):
        pts.append(ContourPoint(float(k[0]), float(k[1]), 0.0, "kernel"))

    scale = math.sqrt(z2(lam * lam))
    if abs(a1) == abs(a2):
        # |As| = lambda on the two edges where a1 s1 and a2 s2 share a sign
        sgn = math.copysign(1.0, a1 * a2)
        for t in np.linspace(0.0, 1.0, n_grid + 1):
            for e in (1.0, -1.0):
                s = (e * t, e * sgn * (1.0 - t))
                pts.append(ContourPoint(scale * s[0], scale * s[1], lam, "omega_extremal"))
    else:
        idx = 0 if abs(a1) > abs(a2) else 1
        for e in (1.0, -1.0):
            s = [0.0, 0.0]
            s[idx] = e * math.copysign(1.0, (a1, a2)[idx])
            pts.append(ContourPoint(scale * s[0], scale * s[1], lam, "omega_extremal"))

    grid = np.union1d(
        np.geomspace(lam * 1e-6, lam, n_grid, endpoint=False),
        np.linspace(0.0, lam, n_grid + 1)[1:-1],
    )
    for b in grid:
        r = math.sqrt(z2(b * b))
        for s in _level_directions(a1, a2, b):
            pts.append(ContourPoint(r * s[0], r * s[1], float(b), "solved_b"))

    # dedupe coincident points (edge pairs share their vertices)
    pts.sort(key=lambda c: (math.atan2(c.x2, c.x1), math.hypot(c.x1, c.x2)))
    out = []
    for c in pts:
        if out and abs(c.x1 - out[-1].x1) + abs(c.x2 - out[-1].x2) <= 1e-14:
            continue
        out.append(c)
    return out


def polygon_area(points) -> float:
    """Shoelace area of an angle-ordered closed polygon."""
    x = np.array([c.x1 for c in points])
    y = np.array([c.x2 for c in points])
    return 0.5 * abs(float(x @ np.roll(y, -1) - y @ np.roll(x, -1)))
