"""
Concentration of the posterior along rays.

Along a direction s the radial density is proportional to
exp(-f(r s)) r^(p-1); its mode r(s) is the positive root of

    ||As|| (r ||As|| + w) = (p - 1) / r,     w = omega_lasso(s),

and the mass beyond q r(s) is at most

    P(q, p) = p e^(p-1) / (p-1)^p * Gamma(p, q (p-1))

whenever w >= 0 (in particular whenever the lasso is zero).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError
from .geometry import GeometryContext, _as_vector, omega_lasso
from .specfun import log_upper_incomplete_gamma

__all__ = [
    "TailBoundReport",
    "ConcentrationViolation",
    "concentration_radius",
    "radius_from_omega",
    "tail_bound",
    "general_radius",
    "empirical_tail_check",
]


class ConcentrationViolation(NumericalError):
    """Empirical tail frequency exceeded the bound by more than 3 sigma."""


@dataclass(frozen=True)
class TailBoundReport:
    q: float
    p: int
    tail_bound: float
    containment_probability: float
    natalini_bound: float | None = None


def radius_from_omega(as_norm, omega, p):
    """Positive root of a (r a + w) = (p-1)/r, vectorised over a and w.

    Uses 2(p-1) / (a (w + sqrt(w^2 + 4(p-1)))) for w > 0 to avoid cancellation.
    """
    a = np.asarray(as_norm, dtype=float)
    w = np.asarray(omega, dtype=float)
    c = 4.0 * (p - 1)
    root = np.sqrt(w * w + c)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(w > 0, 2.0 * (p - 1) / (a * (w + root)), (root - w) / (2.0 * a))
    return out if out.ndim else float(out)


def concentration_radius(ctx: GeometryContext, s) -> float:
    """Mode r(s) of the radial density exp(-f(r s)) r^(p-1) along ``s``."""
    if ctx.p < 2:
        raise DomainError("the concentration radius needs p >= 2")
    v = _as_vector(ctx, s)
    w = omega_lasso(ctx, v)  # raises on kernel directions
    a = float(np.linalg.norm(ctx.A @ v))
    return radius_from_omega(a, w, ctx.p)


def tail_bound(q: float, p: int) -> TailBoundReport:
    """Evaluate P(q, p), its complement and, for q > 1, the Natalini-type bound
    2 p q^(p-1) / (p-1) * exp(-(q-1)(p-1))."""
    if not (math.isfinite(q) and q > 0):
        raise DomainError(f"q must be positive, got {q!r}")
    if int(p) != p or p < 2:
        raise DomainError(f"p must be an integer >= 2, got {p!r}")
    p = int(p)
    log_bound = (
        math.log(p) + (p - 1) - p * math.log(p - 1)
        + log_upper_incomplete_gamma(p, q * (p - 1))
    )
    bound = math.exp(log_bound)
    natalini = None
    if q > 1:
        natalini = math.exp(
            math.log(2 * p) + (p - 1) * math.log(q) - math.log(p - 1) - (q - 1) * (p - 1)
        )
    return TailBoundReport(
        q=float(q), p=p, tail_bound=bound,
        containment_probability=max(0.0, 1.0 - bound),
        natalini_bound=natalini,
    )


def _radial_slope(ctx, l, s, r):
    # right derivative of r -> f(r s + l); sign(0) taken as sign(s_j)
    x = r * s + l
    sig = np.sign(x)
    zero = sig == 0
    sig[zero] = np.sign(s[zero])
    As = ctx.A @ s
    return float(As @ (ctx.A @ x - ctx.y)) + float(s @ sig)


def general_radius(ctx: GeometryContext, l, s, atol: float = 1e-10,
                   max_doublings: int = 200) -> float:
    """Critical point r_l(s) of f(r s + l) - (p-1) ln r around a lasso point ``l``.

    Solves r * d/dr f(r s + l) = p - 1 by bisection; the left side is
    increasing in r when ``l`` minimises f.  ``l`` itself is not checked.
    """
    if ctx.p < 2:
        raise DomainError("general_radius needs p >= 2")
    s = _as_vector(ctx, s)
    l = _as_vector(ctx, l)
    if not np.all(np.isfinite(l)):
        raise DomainError("l must be finite")
    target = ctx.p - 1

    def h(r):
        return r * _radial_slope(ctx, l, s, r) - target

    lo, hi = 0.0, 1.0
    for _ in range(max_doublings):
        if h(hi) > 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NumericalError("could not bracket the radial critical point", hi=hi)
    while hi - lo > atol:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def empirical_tail_check(ctx: GeometryContext, s, q: float, n_samples: int, seed: int):
    """Compare the exact radial tail frequency beyond q r(s) with P(q, p).

    Returns ``(empirical_tail, bound)``; raises ConcentrationViolation if the
    frequency exceeds bound + 3 sqrt(bound / n_samples).
    """
    from .sampler import radial_exact_sampler

    if n_samples < 1000:
        raise DomainError("empirical_tail_check needs at least 1000 samples")
    radius = concentration_radius(ctx, s)
    radii = radial_exact_sampler(ctx, s, n_samples, seed)
    empirical = float(np.mean(radii >= q * radius))
    bound = tail_bound(q, ctx.p).tail_bound
    if empirical > bound + 3.0 * math.sqrt(bound / n_samples):
        raise ConcentrationViolation(
            "empirical tail exceeds the concentration bound",
            empirical=empirical, bound=bound, q=q, n_samples=n_samples,
        )
    return empirical, bound
