"""
Geometry of the posterior c(x) ~ exp(-f(x)), f(x) = ||Ax - y||^2/2 + ||x||_1.

The radial slice Z_p(x) = int_0^inf exp(-f(r x)) r^(p-1) dr is homogeneous of
degree -p in x.  Completing the square in r gives

    f(r x) = ||y||^2/2 - w^2/2 + (r ||Ax|| + w)^2 / 2,
    w = (||x||_1 - <Ax, y>) / ||Ax||,

so that ln Z_p(x) = -||y||^2/2 - p ln||Ax|| + log_weighted_cylinder(p, w).
Partition values are carried as logarithms wherever they are produced by
the closed form.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import DimensionError, DomainError, NumericalError, SingularDirectionError
from .specfun import DEFAULT_QUADRATURE, QuadratureSpec, log_weighted_cylinder

__all__ = [
    "GeometryContext",
    "Direction",
    "KERNEL_RTOL",
    "is_kernel_direction",
    "objective",
    "omega_lasso",
    "partition_radial",
    "partition_closed",
    "quasi_norm",
    "r_max",
    "partition_total",
    "l1_circle_integral",
    "ball_volume_p2",
]

# ||Ax|| <= KERNEL_RTOL * ||x||_1 * lambda_12 is treated as Ax = 0
KERNEL_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class GeometryContext:
    """The (A, y) pair every formula is conditioned on.

    ``A`` may be given as a 1-D sequence, which is read as a single row.
    ``y`` defaults to the zero vector.
    """

    A: np.ndarray
    y: np.ndarray | None = None
    At_y: np.ndarray = field(init=False, repr=False)
    column_norms: np.ndarray = field(init=False, repr=False)
    operator_norm_1_2: float = field(init=False, repr=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        if A.ndim != 2 or A.size == 0:
            raise DimensionError(f"A must be a non-empty matrix, got shape {A.shape}")
        n, p = A.shape
        if self.y is None:
            y = np.zeros(n)
        else:
            y = np.array(self.y, dtype=float, ndmin=1).ravel()
        if y.shape != (n,):
            raise DimensionError(f"y has length {y.size}, A has {n} rows")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
            raise DomainError("A and y must be finite")
        at_y = A.T @ y
        col = np.linalg.norm(A, axis=0)
        for arr in (A, y, at_y, col):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "At_y", at_y)
        object.__setattr__(self, "column_norms", col)
        object.__setattr__(self, "operator_norm_1_2", float(col.max()))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[1]

    @property
    def y_norm_sq(self) -> float:
        return float(self.y @ self.y)


@dataclass(frozen=True, eq=False)
class Direction:
    """A unit vector under the l1 or l2 norm."""

    v: np.ndarray
    norm_tag: str = "l1"

    def __post_init__(self):
        if self.norm_tag not in ("l1", "l2"):
            raise DomainError(f"norm_tag must be 'l1' or 'l2', got {self.norm_tag!r}")
        v = np.array(self.v, dtype=float, ndmin=1).ravel()
        norm = _norm(v, self.norm_tag)
        if abs(norm - 1.0) > 1e-12:
            raise DomainError(f"direction has {self.norm_tag} norm {norm!r}, expected 1")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_vector(cls, x, norm_tag: str = "l1") -> "Direction":
        x = np.asarray(x, dtype=float).ravel()
        norm = _norm(x, norm_tag)
        if norm == 0:
            raise DomainError("cannot normalise the zero vector")
        return cls(x / norm, norm_tag)


def _norm(v, tag):
    return float(np.abs(v).sum()) if tag == "l1" else float(np.linalg.norm(v))


def _as_vector(ctx: GeometryContext, x) -> np.ndarray:
    if isinstance(x, Direction):
        x = x.v
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (ctx.p,):
        raise DimensionError(f"vector has length {x.size}, expected p = {ctx.p}")
    return x


def _require_nonzero(x):
    if not np.any(x):
        raise DomainError("x must be nonzero")


def is_kernel_direction(ctx: GeometryContext, x) -> bool:
    """True when ||Ax|| is negligible relative to ||x||_1 * lambda_12."""
    x = _as_vector(ctx, x)
    ax = float(np.linalg.norm(ctx.A @ x))
    return ax <= KERNEL_RTOL * float(np.abs(x).sum()) * ctx.operator_norm_1_2


def objective(ctx: GeometryContext, x) -> float:
    """f(x) = ||Ax - y||_2^2 / 2 + ||x||_1."""
    x = _as_vector(ctx, x)
    res = ctx.A @ x - ctx.y
    return 0.5 * float(res @ res) + float(np.abs(x).sum())


def omega_lasso(ctx: GeometryContext, x) -> float:
    """(||x||_1 - <Ax, y>) / ||Ax||_2, invariant under x -> t x for t > 0.

    Raises SingularDirectionError when Ax is numerically zero.
    """
    x = _as_vector(ctx, x)
    _require_nonzero(x)
    ax = ctx.A @ x
    ax_norm = float(np.linalg.norm(ax))
    if ax_norm <= KERNEL_RTOL * float(np.abs(x).sum()) * ctx.operator_norm_1_2:
        raise SingularDirectionError("Ax is zero; use the kernel branch of partition_closed")
    return (float(np.abs(x).sum()) - float(ax @ ctx.y)) / ax_norm


# ---------------------------------------------------------------------------
# radial partition function
# ---------------------------------------------------------------------------

_RADIAL_DROP = 60.0


def _log_partition_radial(ctx, x, quad):
    p = ctx.p

    def psi(r):
        if r <= 0:
            return -objective(ctx, np.zeros(p)) if p == 1 else -math.inf
        return -objective(ctx, r * x) + (p - 1) * math.log(r)

    ks = np.arange(-60, 61)
    vals = np.array([psi(2.0 ** k) for k in ks])
    ib = int(np.argmax(vals))
    lo = 0.0 if ib == 0 else 2.0 ** ks[ib - 1]
    hi = 2.0 ** ks[min(ib + 1, len(ks) - 1)]
    opt = optimize.minimize_scalar(
        lambda r: -psi(r), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-10 * hi},
    )
    r_peak, peak = float(opt.x), -float(opt.fun)
    if vals[ib] > peak:
        r_peak, peak = float(2.0 ** ks[ib]), float(vals[ib])

    right = None
    for k, v in zip(ks[ib:], vals[ib:]):
        if 2.0 ** k > r_peak and v < peak - _RADIAL_DROP:
            right = 2.0 ** k
            break
    if right is None:
        raise NumericalError("radial integrand does not decay", x=x.tolist())
    left = 0.0
    for k, v in zip(ks[:ib][::-1], vals[:ib][::-1]):
        if 2.0 ** k < r_peak and v < peak - _RADIAL_DROP:
            left = 2.0 ** k
            break

    def integrand(r):
        return math.exp(psi(r) - peak)

    total = 0.0
    for a, b in ((left, r_peak), (r_peak, right)):
        if b <= a:
            continue
        out = integrate.quad(
            integrand, a, b, epsabs=0.0, epsrel=quad.relative_tolerance,
            limit=quad.max_subdivisions, full_output=1,
        )
        if len(out) > 3:
            raise NumericalError(
                "radial quadrature failed", message=out[3], estimate=out[0], error=out[1],
            )
        total += out[0]
    return peak + math.log(total)


def partition_radial(ctx: GeometryContext, x, quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Z_p(x) by direct quadrature of exp(-f(r x)) r^(p-1) over r > 0.

    The integrand is evaluated through ``objective`` itself, so this serves
    as an independent check on ``partition_closed``.
    """
    x = _as_vector(ctx, x)
    _require_nonzero(x)
    return math.exp(_log_partition_radial(ctx, x, quad))


def partition_closed(ctx: GeometryContext, x, quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """ln Z_p(x) from the parabolic cylinder representation.

    Kernel directions (Ax = 0) use ln[(p-1)! ||x||_1^-p exp(-||y||^2/2)].
    """
    x = _as_vector(ctx, x)
    _require_nonzero(x)
    p = ctx.p
    l1 = float(np.abs(x).sum())
    ax = ctx.A @ x
    ax_norm = float(np.linalg.norm(ax))
    if ax_norm <= KERNEL_RTOL * l1 * ctx.operator_norm_1_2:
        return math.lgamma(p) - p * math.log(l1) - 0.5 * ctx.y_norm_sq
    w = (l1 - float(ax @ ctx.y)) / ax_norm
    return -0.5 * ctx.y_norm_sq - p * math.log(ax_norm) + log_weighted_cylinder(p, w, quad)


def quasi_norm(ctx: GeometryContext, x) -> float:
    """||x||_c = Z_p(x)^(-1/p); zero at the origin."""
    x = _as_vector(ctx, x)
    if not np.any(x):
        return 0.0
    return math.exp(-partition_closed(ctx, x) / ctx.p)


def r_max(ctx: GeometryContext, s) -> float:
    """Length of the longest segment [0, r] s inside the unit quasi-norm ball.

    ``s`` must be an l1 unit vector; r_max(s) = Z_p(s)^(1/p).
    """
    if isinstance(s, Direction) and s.norm_tag != "l1":
        raise DomainError("r_max needs an l1 direction")
    v = _as_vector(ctx, s)
    if abs(float(np.abs(v).sum()) - 1.0) > 1e-12:
        raise DomainError("r_max needs ||s||_1 = 1")
    return math.exp(partition_closed(ctx, v) / ctx.p)


# ---------------------------------------------------------------------------
# total partition function
# ---------------------------------------------------------------------------

_CHUNK = 1 << 16


def _chunk_stats(ctx, seed_seq, size):
    rng = np.random.default_rng(seed_seq)
    x = rng.laplace(size=(size, ctx.p))
    res = x @ ctx.A.T - ctx.y
    w = np.exp(-0.5 * np.einsum("ij,ij->i", res, res))
    mean = float(w.mean())
    m2 = float(((w - mean) ** 2).sum())
    return size, mean, m2


def partition_total(ctx: GeometryContext, n_samples: int, seed: int, threads: int = 1):
    """Monte Carlo estimate of Z = int exp(-f(x)) dx.

    Draws x from the standard Laplace density 2^-p exp(-||x||_1) and
    averages exp(-||Ax - y||^2/2), so Z = 2^p E[...].  Samples are drawn in
    fixed-size chunks with independent seed streams; the result depends on
    ``seed`` and ``n_samples`` only, not on ``threads``.

    Returns
    -------
    (estimate, std_error)
    """
    if int(n_samples) != n_samples or n_samples < 1:
        raise DomainError("n_samples must be a positive integer")
    n_samples = int(n_samples)
    sizes = [_CHUNK] * (n_samples // _CHUNK)
    if n_samples % _CHUNK:
        sizes.append(n_samples % _CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stats = list(pool.map(lambda a: _chunk_stats(ctx, *a), zip(seeds, sizes)))
    else:
        stats = [_chunk_stats(ctx, s, m) for s, m in zip(seeds, sizes)]

    # pairwise combination of chunk means and sums of squares, in chunk order
    count, mean, m2 = stats[0]
    for cnt_b, mean_b, m2_b in stats[1:]:
        tot = count + cnt_b
        delta = mean_b - mean
        mean += delta * cnt_b / tot
        m2 += m2_b + delta * delta * count * cnt_b / tot
        count = tot
    scale = 2.0 ** ctx.p
    if count > 1:
        std_error = scale * math.sqrt(m2 / (count - 1) / count)
    else:
        std_error = 0.0
    return scale * mean, std_error


# ---------------------------------------------------------------------------
# p = 2 surface integration
# ---------------------------------------------------------------------------

_EDGE_SIGNS = ((1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0))


def l1_circle_integral(func, rtol: float = 1e-10) -> float:
    """Integrate func(s) over the l1 unit circle against the cone measure.

    Each edge {(e1 t, e2 (1 - t)) : t in [0, 1]} contributes int_0^1 func dt.
    This is the measure for which dx = r dr dsigma(s) when x = r s with
    ||s||_1 = 1; arc length would overcount every edge by sqrt(2).
    """
    total = 0.0
    for e1, e2 in _EDGE_SIGNS:
        val, _ = integrate.quad(
            lambda t: func(np.array([e1 * t, e2 * (1.0 - t)])),
            0.0, 1.0, epsabs=0.0, epsrel=rtol, limit=200,
        )
        total += val
    return total


def ball_volume_p2(ctx: GeometryContext) -> float:
    """Area of the unit ball of ||.||_c for p = 2, as int r_max(s)^2 / 2 dsigma(s)."""
    if ctx.p != 2:
        raise DimensionError("ball_volume_p2 is only defined for p = 2")
    return l1_circle_integral(lambda s: 0.5 * math.exp(partition_closed(ctx, s)))
