"""ISTA / FISTA for the LASSO point argmin ||Ax - y||^2/2 + ||x||_1."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, DimensionError
from .geometry import GeometryContext, objective

__all__ = [
    "SolverConfig",
    "LassoResult",
    "is_zero_lasso",
    "proximal_step",
    "optimality_residual",
    "lipschitz_constant",
    "solve",
]


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 100_000
    tolerance: float = 1e-10
    step_size: float | str = "auto"

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise DomainError("max_iterations must be a positive integer")
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")
        if self.step_size != "auto" and not (
            isinstance(self.step_size, (int, float)) and self.step_size > 0
        ):
            raise DomainError("step_size must be positive or 'auto'")


@dataclass(frozen=True)
class LassoResult:
    l: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    residual: float


def is_zero_lasso(ctx: GeometryContext) -> bool:
    """0 is a (the) lasso point iff ||A^T y||_inf <= 1."""
    return float(np.abs(ctx.At_y).max()) <= 1.0 + 1e-12


def proximal_step(x, gradient, step: float) -> np.ndarray:
    """Soft-threshold x - step * gradient at level ``step``."""
    x = np.asarray(x, dtype=float)
    gradient = np.asarray(gradient, dtype=float)
    if x.shape != gradient.shape:
        raise DimensionError("x and gradient must have the same shape")
    if not step > 0:
        raise DomainError("step must be positive")
    z = x - step * gradient
    return np.sign(z) * np.maximum(np.abs(z) - step, 0.0)


def optimality_residual(ctx: GeometryContext, x) -> float:
    """max_j dist(g_j, -d|x_j|) with g = A^T (Ax - y); zero exactly at minimisers."""
    x = np.asarray(x, dtype=float)
    g = ctx.A.T @ (ctx.A @ x - ctx.y)
    nz = x != 0
    res = np.where(nz, np.abs(g + np.sign(x)), np.maximum(np.abs(g) - 1.0, 0.0))
    return float(res.max())


def lipschitz_constant(ctx: GeometryContext) -> float:
    """Largest eigenvalue of A^T A (squared spectral norm of A)."""
    return float(np.linalg.norm(ctx.A, 2) ** 2)


def solve(ctx: GeometryContext, cfg: SolverConfig = SolverConfig(), accelerated: bool = True,
          callback=None) -> LassoResult:
    """Proximal gradient descent from x = 0.

    Stops once the subdifferential residual drops to ``cfg.tolerance``.  With
    ``accelerated`` the FISTA momentum sequence is used, otherwise plain ISTA.
    ``callback(k, x)`` is invoked after every iteration.  When the iteration
    budget runs out the last iterate is returned with ``converged=False``.
    """
    p = ctx.p
    x = np.zeros(p)
    if cfg.step_size == "auto":
        lip = lipschitz_constant(ctx)
        if lip == 0.0:
            # A = 0: f = ||y||^2/2 + ||x||_1 is minimised at 0
            return LassoResult(x, objective(ctx, x), 0, True, 0.0)
        step = 1.0 / lip
    else:
        step = float(cfg.step_size)

    res = optimality_residual(ctx, x)
    if res <= cfg.tolerance:
        return LassoResult(x, objective(ctx, x), 0, True, res)

    z = x.copy()
    t = 1.0
    A, y = ctx.A, ctx.y
    for k in range(1, cfg.max_iterations + 1):
        grad = A.T @ (A @ z - y)
        x_new = proximal_step(z, grad, step)
        if accelerated:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            z = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        else:
            z = x_new
        x = x_new
        if callback is not None:
            callback(k, x)
        res = optimality_residual(ctx, x)
        if res <= cfg.tolerance:
            return LassoResult(x, objective(ctx, x), k, True, res)
    return LassoResult(x, objective(ctx, x), cfg.max_iterations, False, res)
