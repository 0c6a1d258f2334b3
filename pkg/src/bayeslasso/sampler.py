"""
Metropolis-Hastings samplers for c(x) ~ exp(-f(x)) and the radius-based
convergence diagnostic.

Every chain draws from its own ``numpy.random.Generator`` seeded with the
caller's seed, so equal (ctx, seed, proposal, length) give identical output.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .concentration import radius_from_omega
from .errors import DomainError, NumericalError, SingularDirectionError
from .geometry import KERNEL_RTOL, GeometryContext, _as_vector, objective
from .specfun import _bracket

__all__ = [
    "ChainResult",
    "DiagnosticSeries",
    "bernoulli_matrix",
    "log_target",
    "run_independent_sampler",
    "run_random_walk",
    "diagnose",
    "ergodicity_rate",
    "radial_exact_sampler",
    "mean_estimator",
]

logger = logging.getLogger(__name__)

INDEPENDENT_LAPLACE = "independent_laplace"
RANDOM_WALK = "random_walk"


@dataclass(frozen=True, eq=False)
class ChainResult:
    """Chain states ``samples[t]`` for t = 0..N-1; row 0 is the initial state."""

    samples: np.ndarray
    accepted: int
    proposal: str
    seed: int
    variance: float | None = None

    @property
    def acceptance_rate(self) -> float:
        moves = len(self.samples) - 1
        return self.accepted / moves if moves else float("nan")


@dataclass(frozen=True, eq=False)
class DiagnosticSeries:
    """Per-iteration check of ||x_t||_2 <= q r(theta_t)."""

    t: np.ndarray
    radius_observed: np.ndarray
    radius_reference: np.ndarray
    satisfied: np.ndarray
    q: float
    first_passage: int | None
    kernel_events: np.ndarray

    @property
    def satisfied_fraction(self) -> float:
        return float(self.satisfied.mean())


def bernoulli_matrix(n: int, p: int, seed: int) -> np.ndarray:
    """n x p matrix with iid entries +-1/sqrt(n), equally likely."""
    if n < 1 or p < 1:
        raise DomainError("n and p must be positive")
    rng = np.random.default_rng(seed)
    signs = 2.0 * rng.integers(0, 2, size=(n, p)) - 1.0
    return signs / math.sqrt(n)


def log_target(ctx: GeometryContext, x) -> float:
    """Unnormalised log density -f(x)."""
    return -objective(ctx, x)


def _freeze(arr):
    arr.setflags(write=False)
    return arr


def run_independent_sampler(ctx: GeometryContext, n_iterations: int, seed: int) -> ChainResult:
    """Independence sampler with iid standard Laplace proposals.

    Target and proposal share the exp(-||x||_1) factor, so the acceptance
    probability reduces to min(1, exp(||Ax - y||^2/2 - ||Ax' - y||^2/2)).
    The initial state is a draw from the proposal.
    """
    if n_iterations < 1:
        raise DomainError("n_iterations must be >= 1")
    rng = np.random.default_rng(seed)
    draws = rng.laplace(size=(n_iterations, ctx.p))
    log_u = np.log(rng.random(n_iterations - 1)).tolist()
    res = draws @ ctx.A.T - ctx.y
    quad = (0.5 * np.einsum("ij,ij->i", res, res)).tolist()

    idx = np.empty(n_iterations, dtype=np.int64)
    idx[0] = 0
    cur, q_cur, accepted = 0, quad[0], 0
    for t in range(1, n_iterations):
        q_new = quad[t]
        if log_u[t - 1] < q_cur - q_new:
            cur, q_cur = t, q_new
            accepted += 1
        idx[t] = cur
    return ChainResult(_freeze(draws[idx]), accepted, INDEPENDENT_LAPLACE, seed)


def run_random_walk(ctx: GeometryContext, n_iterations: int, step_variance: float = 0.5,
                    seed: int = 0) -> ChainResult:
    """Random-walk Metropolis with N(0, step_variance I) increments, started at 0."""
    if n_iterations < 1:
        raise DomainError("n_iterations must be >= 1")
    if not step_variance > 0:
        raise DomainError("step_variance must be positive")
    rng = np.random.default_rng(seed)
    steps = rng.normal(scale=math.sqrt(step_variance), size=(n_iterations - 1, ctx.p))
    log_u = np.log(rng.random(n_iterations - 1)).tolist()

    A, y = ctx.A, ctx.y
    out = np.empty((n_iterations, ctx.p))
    x = np.zeros(ctx.p)
    fx = objective(ctx, x)
    out[0] = x
    accepted = 0
    for t in range(1, n_iterations):
        prop = x + steps[t - 1]
        r = A @ prop - y
        fp = 0.5 * float(r @ r) + float(np.abs(prop).sum())
        if log_u[t - 1] < fx - fp:
            x, fx = prop, fp
            accepted += 1
        out[t] = x
    return ChainResult(_freeze(out), accepted, RANDOM_WALK, seed, float(step_variance))


def diagnose(ctx: GeometryContext, chain: ChainResult, q: float = 5.0) -> DiagnosticSeries:
    """Evaluate ||x_t||_2 <= q r(theta_t) along a chain, theta_t = x_t / ||x_t||_2.

    States at the origin and states whose direction lies in Ker(A) are
    counted as satisfied and get radius_reference = inf.
    """
    if ctx.p < 2:
        raise DomainError("the diagnostic needs p >= 2")
    if not q > 0:
        raise DomainError("q must be positive")
    X = np.asarray(chain.samples, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise DomainError("chain is empty")
    norms = np.linalg.norm(X, axis=1)
    origin = norms <= 1e-12
    safe = np.where(origin, 1.0, norms)
    theta = X / safe[:, None]
    a_theta = theta @ ctx.A.T
    a = np.linalg.norm(a_theta, axis=1)
    l1 = np.abs(theta).sum(axis=1)
    kernel = ~origin & (a <= KERNEL_RTOL * l1 * ctx.operator_norm_1_2)
    undefined = origin | kernel
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = (l1 - a_theta @ ctx.y) / a
        ref = radius_from_omega(a, omega, ctx.p)
    ref = np.where(undefined, np.inf, ref)
    satisfied = norms <= q * ref

    bad = np.flatnonzero(~satisfied)
    if bad.size == 0:
        first = 0
    elif bad[-1] == len(X) - 1:
        first = None
    else:
        first = int(bad[-1]) + 1
    kernel_idx = np.flatnonzero(kernel)
    for t in kernel_idx:
        logger.info("kernel direction at t=%d counted as satisfied", t)
    return DiagnosticSeries(
        t=np.arange(len(X)), radius_observed=norms, radius_reference=ref,
        satisfied=satisfied, q=float(q), first_passage=first, kernel_events=kernel_idx,
    )


def ergodicity_rate(ctx: GeometryContext, z_estimate: float, t: int) -> float:
    """Uniform ergodicity bound (1 - Z/2^p)^t of the independence sampler."""
    bound = 2.0 ** ctx.p
    if not (0 < z_estimate <= bound):
        raise DomainError(f"Z must lie in (0, 2^p] = (0, {bound}], got {z_estimate!r}")
    if int(t) != t or t < 0:
        raise DomainError("t must be a nonnegative integer")
    return (1.0 - z_estimate / bound) ** int(t)


# ---------------------------------------------------------------------------
# exact radial sampling
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _cell_masses(logf, peak, pts):
    a, b = pts[:-1], pts[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    u = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    with np.errstate(divide="ignore"):
        vals = np.exp(logf(u) - peak)
    return half * (vals @ _GL_WEIGHTS)


def _radial_cdf_table(omega, p, tol=1e-13, max_cells=1 << 16):
    # in u = ||As|| r the density is proportional to exp(-(u + w)^2/2) u^(p-1)
    c = p - 1.0
    if c == 0:
        mode = max(-omega, 0.0)
    elif omega > 0:
        mode = 2.0 * c / (omega + math.sqrt(omega * omega + 4.0 * c))
    else:
        mode = 0.5 * (-omega + math.sqrt(omega * omega + 4.0 * c))

    def logf(u):
        u = np.asarray(u, dtype=float)
        # for w >= 0 drop the constant -w^2/2, which would swamp the mode region
        out = -0.5 * (u + omega) ** 2 if omega < 0 else -u * (0.5 * u + omega)
        if c:
            out = out + c * np.log(u)
        return out

    with np.errstate(divide="ignore"):
        peak = float(logf(mode))
        left, right = _bracket(lambda u: float(logf(u)), mode, peak, 1.0 / (1.0 + abs(omega)))

    def table(m):
        pts = []
        if mode > left:
            pts.append(np.linspace(left, mode, m + 1)[:-1])
        pts.append(np.linspace(mode, right, m + 1))
        pts = np.concatenate(pts)
        cdf = np.concatenate([[0.0], np.cumsum(_cell_masses(logf, peak, pts))])
        return pts, cdf / cdf[-1]

    m = 256
    pts, cdf = table(m)
    while True:
        fine_pts, fine_cdf = table(2 * m)
        if np.max(np.abs(fine_cdf[::2] - cdf)) <= tol:
            return fine_pts, fine_cdf
        m *= 2
        if 2 * m > max_cells:
            raise NumericalError("radial CDF table did not converge", omega=omega, p=p)
        pts, cdf = fine_pts, fine_cdf


def radial_exact_sampler(ctx: GeometryContext, s, n_samples: int, seed: int) -> np.ndarray:
    """iid draws of r from exp(-f(r s)) r^(p-1) dr by numerical inverse CDF.

    The CDF is tabulated with Gauss-Legendre cell masses on a grid that is
    doubled until it stops changing, out to where the density has dropped
    by e^-50 from its peak; inversion uses monotone cubic interpolation.
    """
    v = _as_vector(ctx, s)
    if not np.any(v):
        raise DomainError("direction must be nonzero")
    As = ctx.A @ v
    a = float(np.linalg.norm(As))
    l1 = float(np.abs(v).sum())
    if a <= KERNEL_RTOL * l1 * ctx.operator_norm_1_2:
        raise SingularDirectionError("As = 0: the radial density is not of the assumed form")
    if n_samples < 1:
        raise DomainError("n_samples must be positive")
    omega = (l1 - float(As @ ctx.y)) / a

    pts, cdf = _radial_cdf_table(omega, ctx.p)
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    inverse = PchipInterpolator(cdf[keep], pts[keep])
    rng = np.random.default_rng(seed)
    u = inverse(rng.random(n_samples))
    return np.maximum(u, 0.0) / a


def mean_estimator(chain: ChainResult, burn_in: int = 0) -> np.ndarray:
    """Average of the chain states from index ``burn_in`` on."""
    X = np.asarray(chain.samples, dtype=float)
    if burn_in < 0:
        raise DomainError("burn_in must be nonnegative")
    if burn_in >= len(X):
        raise DomainError("burn-in leaves no samples")
    return X[burn_in:].mean(axis=0)
