"""
Special functions used by the closed-form partition function formulas.

Everything here is a pure function of its arguments. The parabolic cylinder
function is only exposed through the weighted logarithm

    log_weighted_cylinder(nu, z) = ln[ Gamma(nu) exp(z^2/4) D_{-nu}(z) ]
                                 = ln int_0^inf exp(-r^2/2 - z r) r^(nu-1) dr

which is the only combination the partition function needs, and which stays
finite in log scale where D_{-nu}(z) and exp(z^2/4) separately would not.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx

from .errors import DomainError, NumericalError

__all__ = [
    "QuadratureSpec",
    "DEFAULT_QUADRATURE",
    "log_gamma",
    "upper_incomplete_gamma",
    "log_upper_incomplete_gamma",
    "normal_cdf",
    "normal_sf",
    "mills_ratio",
    "log_weighted_cylinder",
    "adaptive_gauss_kronrod",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Accuracy controls for the adaptive quadratures."""

    relative_tolerance: float = 1e-12
    max_subdivisions: int = 500

    def __post_init__(self):
        if not self.relative_tolerance > 0:
            raise DomainError("relative_tolerance must be positive")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be a positive integer")


DEFAULT_QUADRATURE = QuadratureSpec()


def _check_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a finite positive number, got {value!r}")


def log_gamma(nu: float) -> float:
    """ln Gamma(nu) for nu > 0."""
    _check_positive("nu", nu)
    return math.lgamma(nu)


# ---------------------------------------------------------------------------
# upper incomplete gamma
# ---------------------------------------------------------------------------

_CF_EPS = 1e-16
_TINY = 1e-300


def _is_integer(nu):
    return float(nu).is_integer()


def _log_series_integer(p, x):
    # ln[(p-1)! e^{-x} sum_{k<p} x^k/k!], all terms positive
    k = np.arange(p, dtype=float)
    terms = k * math.log(x) - np.array([math.lgamma(kk + 1.0) for kk in k])
    top = terms.max()
    return math.lgamma(p) - x + top + math.log(np.exp(terms - top).sum())


def _log_lower_series(a, x, max_iter=10_000):
    # ln gamma(a, x) via the power series of the regularised lower function
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(max_iter):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _CF_EPS:
            return -x + a * math.log(x) + math.log(total)
    raise NumericalError("incomplete gamma series did not converge", nu=a, x=x)


def _log_upper_cf(a, x, max_iter=10_000):
    # modified Lentz evaluation of the continued fraction for Gamma(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, max_iter + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return -x + a * math.log(x) + math.log(h)
    raise NumericalError("incomplete gamma continued fraction did not converge", nu=a, x=x)


def log_upper_incomplete_gamma(nu: float, x: float) -> float:
    """ln Gamma(nu, x), finite even where Gamma(nu, x) under/overflows."""
    _check_positive("nu", nu)
    if not (math.isfinite(x) and x >= 0):
        raise DomainError(f"x must be finite and nonnegative, got {x!r}")
    if x == 0:
        return math.lgamma(nu)
    if _is_integer(nu) and nu <= 10_000:
        return _log_series_integer(int(nu), x)
    if x < nu + 1.0:
        log_lower = _log_lower_series(nu, x)
        lg = math.lgamma(nu)
        # Gamma(nu, x) = Gamma(nu) (1 - P)
        return lg + math.log1p(-math.exp(log_lower - lg))
    return _log_upper_cf(nu, x)


def upper_incomplete_gamma(nu: float, x: float) -> float:
    """Gamma(nu, x) = int_x^inf e^{-t} t^{nu-1} dt.

    Integer ``nu`` goes through the finite sum
    (nu-1)! e^{-x} sum_{k<nu} x^k / k!; other orders use the power series
    below x = nu + 1 and a continued fraction above it.
    """
    return math.exp(log_upper_incomplete_gamma(nu, x))


# ---------------------------------------------------------------------------
# normal distribution
# ---------------------------------------------------------------------------

def normal_cdf(x: float) -> float:
    """Standard normal distribution function F(x)."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_sf(x: float) -> float:
    """Upper tail 1 - F(x), accurate far into the tail."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def mills_ratio(x):
    """exp(x^2/2) sqrt(2 pi) (1 - F(x)), without overflow for large x."""
    return math.sqrt(math.pi / 2.0) * erfcx(np.asarray(x, dtype=float) / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod (7/15)
# ---------------------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes
_GWEIGHTS[[1, 3, 5]] = _WG[:3]
_GWEIGHTS[[13, 11, 9]] = _WG[:3]
_GWEIGHTS[7] = _WG[3]


def _gk15(func, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    vals = func(mid + half * _NODES)
    k = half * float(_KWEIGHTS @ vals)
    g = half * float(_GWEIGHTS @ vals)
    return k, abs(k - g)


def adaptive_gauss_kronrod(func, breakpoints, rtol=1e-12, max_subdivisions=500):
    """Globally adaptive G7/K15 quadrature of a vectorised ``func``.

    The initial partition is given by ``breakpoints``; the interval with the
    largest error estimate is bisected until the summed estimate falls below
    ``rtol`` times the running total.

    Returns
    -------
    (value, error_estimate)
    """
    heap = []
    total = 0.0
    err = 0.0
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        if b <= a:
            continue
        val, e = _gk15(func, a, b)
        total += val
        err += e
        heapq.heappush(heap, (-e, a, b, val))
    n_intervals = len(heap)
    while err > rtol * abs(total) and err > 1e-300:
        if n_intervals >= max_subdivisions:
            raise NumericalError(
                "adaptive quadrature hit the subdivision limit",
                estimate=total, error=err, intervals=n_intervals,
            )
        neg_e, a, b, val = heapq.heappop(heap)
        m = 0.5 * (a + b)
        v1, e1 = _gk15(func, a, m)
        v2, e2 = _gk15(func, m, b)
        total += v1 + v2 - val
        err += e1 + e2 + neg_e
        heapq.heappush(heap, (-e1, a, m, v1))
        heapq.heappush(heap, (-e2, m, b, v2))
        n_intervals += 1
    return total, err


# ---------------------------------------------------------------------------
# weighted parabolic cylinder function
# ---------------------------------------------------------------------------

# integrand is cut where it has dropped by exp(-_DROP) from its peak
_DROP = 50.0
_N_INITIAL = 8


def _bracket(logf, mode, peak, scale):
    """Return [left, right] outside which logf < peak - _DROP (logf unimodal)."""
    floor = peak - _DROP
    h = 1e-3 * (mode if mode > 0 else scale)
    # expand to the right
    while logf(mode + h) >= floor:
        h *= 2.0
        if not math.isfinite(h):
            raise NumericalError("could not bracket integrand tail", mode=mode)
    lo, hi = mode + 0.5 * h, mode + h
    if logf(lo) < floor:
        lo = mode
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if logf(mid) >= floor:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-3 * (hi - mode):
            break
    right = hi
    left = 0.0
    if mode > 0:
        with np.errstate(divide="ignore"):
            at_zero = logf(0.0)
        if at_zero < floor:
            lo, hi = 0.0, mode
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if logf(mid) < floor:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-3 * (mode - lo):
                    break
            left = lo
    return left, right


def _breakpoints(left, mode, right):
    pts = []
    if mode > left:
        pts.extend(np.linspace(left, mode, _N_INITIAL + 1)[:-1])
    pts.extend(np.linspace(mode, right, _N_INITIAL + 1))
    return np.array(pts)


def log_weighted_cylinder(nu: float, z: float, quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """ln int_0^inf exp(-r^2/2 - z r) r^(nu-1) dr  (= ln[Gamma(nu) e^{z^2/4} D_{-nu}(z)]).

    Parameters
    ----------
    nu : float
        Order, nu > 0.
    z : float
        Any finite real; negative z shifts the mass outwards.
    quad : QuadratureSpec
        Tolerance and subdivision budget of the adaptive quadrature.

    Notes
    -----
    The integrand is rescaled by its peak value before integration, so the
    result stays finite for large orders and large |z|. For nu < 1 the
    substitution t = r**nu removes the endpoint singularity.
    """
    _check_positive("nu", nu)
    if not math.isfinite(z):
        raise DomainError(f"z must be finite, got {z!r}")

    if nu >= 1.0:
        c = nu - 1.0
        if c == 0.0:
            mode = max(-z, 0.0)
        elif z >= 0:
            mode = 2.0 * c / (z + math.sqrt(z * z + 4.0 * c))
        else:
            mode = 0.5 * (-z + math.sqrt(z * z + 4.0 * c))

        def logf(r):
            r = np.asarray(r, dtype=float)
            with np.errstate(divide="ignore"):
                out = -0.5 * r * r - z * r
                if c:
                    out = out + c * np.log(r)
            return out

        shift = 0.0
        scale = 1.0 / (1.0 + abs(z))
    else:
        inv = 1.0 / nu
        mode = max(-z, 0.0) ** nu

        def logf(t):
            r = np.asarray(t, dtype=float) ** inv
            return -0.5 * r * r - z * r

        shift = -math.log(nu)
        scale = (1.0 / (1.0 + abs(z))) ** nu

    peak = float(logf(mode))
    left, right = _bracket(lambda u: float(logf(u)), mode, peak, scale)
    pts = _breakpoints(left, mode, right)
    value, err = adaptive_gauss_kronrod(
        lambda u: np.exp(logf(u) - peak),
        pts,
        rtol=quad.relative_tolerance,
        max_subdivisions=quad.max_subdivisions,
    )
    if not value > 0:
        raise NumericalError("non-positive quadrature value", nu=nu, z=z, estimate=value, error=err)
    return peak + math.log(value) + shift
