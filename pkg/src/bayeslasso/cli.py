"""
Command-line front end.

Every command writes its primary output (CSV or JSON) to stdout or to
``--output``.  Outputs are pure functions of the flags: floats in data
columns use 17 significant digits, table-reproduction columns 4 decimals.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import concentration, contour2d, geometry, lasso, sampler
from .errors import DimensionError, DomainError, NumericalError, SingularDirectionError

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

DEFAULT_Q_LIST = (2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0)


class InputFileError(Exception):
    """A matrix or vector file could not be read or parsed."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved settings of an ``mcmc`` run."""

    p: int
    n: int
    matrix_source: tuple
    y_source: tuple
    iterations: int
    q: float
    seed: int
    sampler: str
    variance: float | None = None

    def __post_init__(self):
        if self.p < 1 or self.n < 1:
            raise DomainError("p and n must be positive")
        if self.iterations < 1:
            raise DomainError("--iterations must be >= 1")
        if not self.q > 0:
            raise DomainError("--q must be positive")
        if self.sampler not in ("is", "rw"):
            raise DomainError(f"unknown sampler {self.sampler!r}")
        if self.sampler == "rw" and not (self.variance and self.variance > 0):
            raise DomainError("--variance must be positive")


def fmt(x) -> str:
    """17 significant digits; inf/nan spelled as Python does."""
    return format(float(x), ".17g")


def fmt4(x) -> str:
    return format(float(x), ".4f")


def matrix_hash(A) -> str:
    A = np.ascontiguousarray(A, dtype="<f8")
    h = hashlib.sha256()
    h.update(repr(A.shape).encode())
    h.update(A.tobytes())
    return h.hexdigest()


def _load_matrix(path):
    try:
        A = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except OSError as exc:
        raise InputFileError(f"cannot read matrix file {path}: {exc}") from exc
    except ValueError as exc:
        raise InputFileError(f"cannot parse matrix file {path}: {exc}") from exc
    return A


def _load_vector(path):
    try:
        return np.loadtxt(path, ndmin=1, dtype=float)
    except OSError as exc:
        raise InputFileError(f"cannot read vector file {path}: {exc}") from exc
    except ValueError as exc:
        raise InputFileError(f"cannot parse vector file {path}: {exc}") from exc


def build_context(args) -> geometry.GeometryContext:
    """GeometryContext from --matrix/--bernoulli-seed and --y."""
    if args.matrix is not None:
        A = _load_matrix(args.matrix)
        if args.p is not None and A.shape[1] != args.p:
            raise DimensionError(f"matrix has {A.shape[1]} columns, --p says {args.p}")
        if args.n is not None and A.shape[0] != args.n:
            raise DimensionError(f"matrix has {A.shape[0]} rows, --n says {args.n}")
    else:
        if args.p is None or args.n is None:
            raise DomainError("--bernoulli-seed needs --p and --n")
        A = sampler.bernoulli_matrix(args.n, args.p, args.bernoulli_seed)
    y = _load_vector(args.y) if args.y is not None else None
    return geometry.GeometryContext(A, y)


@contextlib.contextmanager
def _open_out(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _dump_json(obj, fh):
    fh.write(json.dumps(obj, indent=2, allow_nan=True))
    fh.write("\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_pqp(args):
    if args.p < 2:
        raise DomainError("--p must be >= 2")
    with _open_out(args.output) as fh:
        w = _csv_writer(fh)
        w.writerow(["q", "tail_bound", "containment_probability", "natalini_bound"])
        for q in args.q:
            rep = concentration.tail_bound(q, args.p)
            nat = "" if rep.natalini_bound is None else fmt(rep.natalini_bound)
            w.writerow([fmt(q), fmt(rep.tail_bound), fmt4(rep.containment_probability), nat])
    return EXIT_OK


def _radial_log_density(ctx, s, r):
    x = r * s
    return -geometry.objective(ctx, x) + (ctx.p - 1) * math.log(r)


def cmd_density_profile(args):
    ctx = build_context(args)
    s = np.asarray(args.s, dtype=float)
    if s.shape != (ctx.p,):
        raise DimensionError(f"--s has {s.size} entries, expected {ctx.p}")
    if not np.any(s):
        raise DomainError("--s must be nonzero")
    if not (0 < args.r_min < args.r_max) or args.steps < 1:
        raise DomainError("need 0 < r_min < r_max and steps >= 1")

    span = args.r_max - args.r_min
    radii = [args.r_min + span * (i / args.steps) for i in range(args.steps + 1)]
    dens = [math.exp(_radial_log_density(ctx, s, r)) for r in radii]
    z = geometry.partition_radial(ctx, s)

    i_best = max(range(len(dens)), key=dens.__getitem__)
    lo = radii[max(i_best - 1, 0)]
    hi = radii[min(i_best + 1, len(radii) - 1)]
    if hi > lo:
        opt = optimize.minimize_scalar(
            lambda r: -_radial_log_density(ctx, s, r), bounds=(lo, hi),
            method="bounded", options={"xatol": 1e-12},
        )
        mode = float(opt.x)
    else:
        mode = radii[i_best]

    summary = {
        "s": s.tolist(),
        "grid_mode": radii[i_best],
        "mode": mode,
        "partition_radial": z,
        "matrix_hash": matrix_hash(ctx.A),
    }
    try:
        summary["concentration_radius"] = concentration.concentration_radius(ctx, s)
    except SingularDirectionError:
        summary["concentration_radius"] = None
        summary["warning"] = "As = 0: kernel direction, concentration radius undefined"
    except DomainError as exc:
        summary["concentration_radius"] = None
        summary["warning"] = str(exc)

    with _open_out(args.output) as fh:
        w = _csv_writer(fh)
        w.writerow(["r", "unnormalized", "normalized"])
        for r, d in zip(radii, dens):
            w.writerow([fmt(r), fmt(d), fmt(d / z)])
    if args.json:
        with open(args.json, "w") as fh:
            _dump_json(summary, fh)
    else:
        sys.stderr.write(json.dumps(summary) + "\n")
    return EXIT_OK


def cmd_contour2d(args):
    pts = contour2d.contour_points(args.a1, args.a2, args.n_grid)
    with _open_out(args.output) as fh:
        w = _csv_writer(fh)
        w.writerow(["x1", "x2", "direction_b", "kind"])
        for c in pts:
            w.writerow([fmt(c.x1), fmt(c.x2), fmt(c.direction_b), c.kind])
    return EXIT_OK


def experiment_config(args, ctx) -> ExperimentConfig:
    return ExperimentConfig(
        p=ctx.p, n=ctx.n,
        matrix_source=("file", args.matrix) if args.matrix is not None
        else ("bernoulli_seed", args.bernoulli_seed),
        y_source=("file", args.y) if args.y is not None else ("zero", None),
        iterations=args.iterations, q=args.q, seed=args.seed,
        sampler=args.sampler, variance=args.variance if args.sampler == "rw" else None,
    )


def cmd_mcmc(args):
    ctx = build_context(args)
    cfg = experiment_config(args, ctx)
    if cfg.sampler == "is":
        chain = sampler.run_independent_sampler(ctx, cfg.iterations, cfg.seed)
    else:
        chain = sampler.run_random_walk(ctx, cfg.iterations, cfg.variance, cfg.seed)
    diag = sampler.diagnose(ctx, chain, args.q)
    mean = sampler.mean_estimator(chain, args.burn_in)

    summary = {
        "sampler": args.sampler,
        "variance": args.variance if args.sampler == "rw" else None,
        "p": ctx.p,
        "n": ctx.n,
        "iterations": args.iterations,
        "q": args.q,
        "seed": args.seed,
        "matrix_hash": matrix_hash(ctx.A),
        "acceptance_rate": None if math.isnan(chain.acceptance_rate) else chain.acceptance_rate,
        "first_passage": diag.first_passage,
        "satisfied_fraction": diag.satisfied_fraction,
        "kernel_events": int(diag.kernel_events.size),
        "burn_in": args.burn_in,
        "mean_estimator": mean.tolist(),
        "mean_norm": float(np.linalg.norm(mean)),
        "ergodicity_rate_per_step": None,
        "partition_estimate": None,
        "partition_std_error": None,
    }
    if args.sampler == "is":
        z, se = geometry.partition_total(ctx, args.z_samples, args.seed, threads=args.threads)
        summary["partition_estimate"] = z
        summary["partition_std_error"] = se
        summary["ergodicity_rate_per_step"] = sampler.ergodicity_rate(ctx, min(z, 2.0 ** ctx.p), 1)

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = _csv_writer(fh)
            w.writerow(["t", "norm2", "q_times_radius", "satisfied"])
            for t, obs, ref, ok in zip(diag.t, diag.radius_observed, diag.radius_reference, diag.satisfied):
                w.writerow([int(t), fmt(obs), fmt(args.q * ref), int(ok)])
    with _open_out(args.output) as fh:
        _dump_json(summary, fh)
    return EXIT_OK


def cmd_lasso(args):
    A = _load_matrix(args.matrix)
    y = _load_vector(args.y)
    ctx = geometry.GeometryContext(A, y)
    cfg = lasso.SolverConfig(max_iterations=args.max_iterations, tolerance=args.tolerance)
    res = lasso.solve(ctx, cfg, accelerated=not args.ista)
    zero = lasso.is_zero_lasso(ctx)
    summary = {
        "l": res.l.tolist(),
        "objective": res.objective_value,
        "iterations": res.iterations,
        "converged": res.converged,
        "optimality_residual": res.residual,
        "zero_lasso_flag": zero,
        "consistent": (not zero) or float(np.linalg.norm(res.l)) <= 100 * args.tolerance,
        "algorithm": "ista" if args.ista else "fista",
        "matrix_hash": matrix_hash(ctx.A),
    }
    with _open_out(args.output) as fh:
        _dump_json(summary, fh)
    return EXIT_OK


def cmd_partition(args):
    ctx = build_context(args)
    if args.samples < 1:
        raise DomainError("--samples must be >= 1")
    z, se = geometry.partition_total(ctx, args.samples, args.seed, threads=args.threads)
    summary = {
        "p": ctx.p,
        "n": ctx.n,
        "samples": args.samples,
        "seed": args.seed,
        "estimate": z,
        "std_error": se,
        "matrix_hash": matrix_hash(ctx.A),
    }
    if ctx.p == 2:
        summary["ball_volume"] = geometry.ball_volume_p2(ctx)
    with _open_out(args.output) as fh:
        _dump_json(summary, fh)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_matrix_options(sp):
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--matrix", help="CSV file, one matrix row per line")
    g.add_argument("--bernoulli-seed", type=int, help="draw A with iid +-1/sqrt(n) entries")
    sp.add_argument("--p", type=int, help="number of columns of A")
    sp.add_argument("--n", type=int, help="number of rows of A")
    sp.add_argument("--y", help="observation file, one value per line (default: y = 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bayeslasso",
        description="Bayesian LASSO geometry, concentration bounds and MCMC diagnostics.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo sums")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("pqp", parents=[common], help="table of the tail bound P(q, p)")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--q", type=float, nargs="+", default=list(DEFAULT_Q_LIST))
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_pqp)

    sp = sub.add_parser("density-profile", parents=[common], help="tabulate the radial density c(r, s)")
    _add_matrix_options(sp)
    sp.add_argument("--s", type=float, nargs="+", required=True, help="direction s")
    sp.add_argument("--r-min", type=float, default=0.1)
    sp.add_argument("--r-max", type=float, default=10.0)
    sp.add_argument("--steps", type=int, default=1000)
    sp.add_argument("--json", help="write the summary (mode, r(s)) here instead of stderr")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_density_profile)

    sp = sub.add_parser("contour2d", parents=[common], help="contour of the unit ball for A = (a1, a2), y = 0")
    sp.add_argument("--a1", type=float, required=True)
    sp.add_argument("--a2", type=float, required=True)
    sp.add_argument("--n-grid", type=int, default=200)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_contour2d)

    sp = sub.add_parser("mcmc", parents=[common], help="run a sampler and the radius diagnostic")
    _add_matrix_options(sp)
    sp.add_argument("--iterations", type=int, default=100_000)
    sp.add_argument("--q", type=float, default=5.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sampler", choices=("is", "rw"), default="rw")
    sp.add_argument("--variance", type=float, default=0.5, help="random-walk step variance")
    sp.add_argument("--burn-in", type=int, default=0)
    sp.add_argument("--z-samples", type=int, default=100_000,
                    help="Monte Carlo samples for Z (independence sampler rate)")
    sp.add_argument("--csv", help="write per-iteration diagnostics here")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_mcmc)

    sp = sub.add_parser("lasso", parents=[common], help="compute a lasso point")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--ista", action="store_true", help="plain ISTA instead of FISTA")
    sp.add_argument("--tolerance", type=float, default=1e-10)
    sp.add_argument("--max-iterations", type=int, default=100_000)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_lasso)

    sp = sub.add_parser("partition", parents=[common], help="Monte Carlo estimate of Z")
    _add_matrix_options(sp)
    sp.add_argument("--samples", type=int, default=1_000_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_partition)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"numerical failure: {exc} {exc.payload}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DomainError, DimensionError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
