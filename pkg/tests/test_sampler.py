import logging
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from bayeslasso.concentration import concentration_radius, tail_bound
from bayeslasso.errors import DomainError, SingularDirectionError
from bayeslasso.geometry import GeometryContext, objective, partition_total
from bayeslasso.sampler import (
    INDEPENDENT_LAPLACE,
    RANDOM_WALK,
    ChainResult,
    bernoulli_matrix,
    diagnose,
    ergodicity_rate,
    log_target,
    mean_estimator,
    _radial_cdf_table,
    radial_exact_sampler,
    run_independent_sampler,
    run_random_walk,
)

seeds = st.integers(0, 2**32 - 1)


def cdf_oracle_1d(ctx, lo=-15.0, hi=15.0, cells=3000):
    """CDF of exp(-f(x)) on the line by cellwise quadrature, as an interpolant."""
    edges = np.union1d(np.linspace(lo, hi, cells + 1), [0.0])
    dens = lambda x: math.exp(-objective(ctx, [x]))
    mass = np.array([integrate.quad(dens, a, b, epsabs=0, epsrel=1e-12)[0] for a, b in zip(edges[:-1], edges[1:])])
    cdf = np.concatenate([[0.0], np.cumsum(mass)])
    cdf /= cdf[-1]
    return lambda x: np.interp(x, edges, cdf)


def kolmogorov(samples, cdf):
    x = np.sort(np.asarray(samples).ravel())
    n = len(x)
    F = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


# --- matrix / target -----------------------------------------------------------

def test_bernoulli_matrix():
    A = bernoulli_matrix(4, 7, seed=0)
    assert A.shape == (4, 7)
    assert set(np.unique(A)) == {-0.5, 0.5}
    assert np.array_equal(A, bernoulli_matrix(4, 7, seed=0))
    with pytest.raises(DomainError):
        bernoulli_matrix(0, 3, seed=0)


@given(seeds, st.integers(1, 5))
def test_log_target(seed, p):
    rng = np.random.default_rng(seed)
    ctx = GeometryContext(rng.normal(size=(2, p)), rng.normal(size=2))
    x, x2 = rng.normal(size=p), rng.normal(size=p)
    assert log_target(ctx, x) - log_target(ctx, x2) == pytest.approx(objective(ctx, x2) - objective(ctx, x), abs=1e-12)
    assert log_target(GeometryContext(np.ones((1, p))), np.zeros(p)) == 0.0


def test_target_normalises_at_p1():
    ctx = GeometryContext([[0.8]], [0.4])
    val, _ = integrate.quad(lambda x: math.exp(log_target(ctx, [x])), -np.inf, np.inf, points=None)
    z, se = partition_total(ctx, 400_000, seed=3)
    assert abs(val - z) <= 3 * se


# --- independence sampler -----------------------------------------------------------

def test_independent_sampler_zero_matrix_accepts_everything():
    chain = run_independent_sampler(GeometryContext(np.zeros((2, 3))), 500, seed=1)
    assert chain.accepted == 499 and chain.acceptance_rate == 1.0
    assert chain.proposal == INDEPENDENT_LAPLACE


def test_independent_sampler_rate_and_determinism():
    ctx = GeometryContext(bernoulli_matrix(4, 7, seed=0))
    a = run_independent_sampler(ctx, 5000, seed=9)
    b = run_independent_sampler(ctx, 5000, seed=9)
    assert np.array_equal(a.samples, b.samples) and a.accepted == b.accepted
    assert 0 < a.acceptance_rate < 1
    assert 0 <= a.accepted <= len(a.samples) - 1
    assert not a.samples.flags.writeable


def test_independent_acceptance_depends_only_on_quadratic_terms():
    # full MH log ratio [-f(x') + l1(x')] - [-f(x) + l1(x)] equals the reduced one
    rng = np.random.default_rng(5)
    ctx = GeometryContext(rng.normal(size=(3, 5)), rng.normal(size=3))
    for _ in range(100):
        x, xp = rng.laplace(size=5), rng.laplace(size=5)
        full = (log_target(ctx, xp) + np.abs(xp).sum()) - (log_target(ctx, x) + np.abs(x).sum())
        rx, rxp = ctx.A @ x - ctx.y, ctx.A @ xp - ctx.y
        reduced = 0.5 * rx @ rx - 0.5 * rxp @ rxp
        assert abs(full - reduced) <= 1e-12


def test_single_iteration_chains():
    ctx = GeometryContext(np.ones((1, 2)))
    for chain in (run_independent_sampler(ctx, 1, 0), run_random_walk(ctx, 1, 0.5, 0)):
        assert chain.samples.shape == (1, 2) and chain.accepted == 0
        assert math.isnan(chain.acceptance_rate)
    with pytest.raises(DomainError):
        run_independent_sampler(ctx, 0, 0)


# --- random walk ----------------------------------------------------------------------

def test_random_walk_basics():
    ctx = GeometryContext(bernoulli_matrix(4, 7, seed=0))
    a = run_random_walk(ctx, 3000, 0.5, seed=4)
    assert np.array_equal(a.samples, run_random_walk(ctx, 3000, 0.5, seed=4).samples)
    assert not np.any(a.samples[0]) and a.proposal == RANDOM_WALK and a.variance == 0.5
    with pytest.raises(DomainError):
        run_random_walk(ctx, 10, 0.0, seed=0)


def test_random_walk_tiny_steps_accept():
    ctx = GeometryContext(bernoulli_matrix(4, 7, seed=0))
    assert run_random_walk(ctx, 5000, 1e-6, seed=2).acceptance_rate >= 0.99


@pytest.mark.slow
@pytest.mark.parametrize("which", ["rw", "is"])
def test_stationarity_p1(which):
    ctx = GeometryContext([[1.0]], [0.5])
    cdf = cdf_oracle_1d(ctx)
    if which == "rw":
        chain = run_random_walk(ctx, 100_000, 0.5, seed=21)
    else:
        chain = run_independent_sampler(ctx, 100_000, seed=22)
    assert kolmogorov(chain.samples, cdf) <= 0.02


# --- diagnostic ------------------------------------------------------------------------

def test_diagnose_origin_chain():
    ctx = GeometryContext(bernoulli_matrix(4, 7, seed=0))
    chain = ChainResult(np.zeros((10, 7)), 0, RANDOM_WALK, 0, 0.5)
    d = diagnose(ctx, chain, 5.0)
    assert d.satisfied.all() and d.first_passage == 0
    assert np.isinf(d.radius_reference).all()


def test_diagnose_boundary_inclusive_and_first_passage():
    ctx = GeometryContext(np.eye(2))
    theta = np.array([0.6, 0.8])
    r = concentration_radius(ctx, theta)
    q = 3.0
    states = np.array([q * r * theta, 10 * q * r * theta, 0.5 * theta, 0.1 * theta])
    d = diagnose(ctx, ChainResult(states, 3, RANDOM_WALK, 0, 0.5), q)
    assert np.array_equal(d.satisfied, d.radius_observed <= q * d.radius_reference)
    assert d.satisfied.tolist() == [True, False, True, True]
    assert d.first_passage == 2
    d2 = diagnose(ctx, ChainResult(states[:2], 1, RANDOM_WALK, 0, 0.5), q)
    assert d2.first_passage is None


def test_diagnose_kernel_states_logged(caplog):
    ctx = GeometryContext([[1.0, 1.0]])
    states = np.array([[1.0, -1.0], [0.1, 0.2]])
    with caplog.at_level(logging.INFO, logger="bayeslasso.sampler"):
        d = diagnose(ctx, ChainResult(states, 1, RANDOM_WALK, 0, 0.5), 5.0)
    assert d.kernel_events.tolist() == [0] and d.satisfied[0]
    assert "kernel direction" in caplog.text


def test_diagnose_validation():
    ctx = GeometryContext([[1.0]])
    with pytest.raises(DomainError):
        diagnose(ctx, ChainResult(np.zeros((2, 1)), 0, RANDOM_WALK, 0), 5.0)
    ctx2 = GeometryContext(np.eye(2))
    with pytest.raises(DomainError):
        diagnose(ctx2, ChainResult(np.zeros((2, 2)), 0, RANDOM_WALK, 0), 0.0)


@pytest.mark.slow
def test_diagnose_random_walk_fraction():
    ctx = GeometryContext(bernoulli_matrix(4, 7, seed=0))
    d = diagnose(ctx, run_random_walk(ctx, 100_000, 0.5, seed=1), 5.0)
    assert d.satisfied_fraction >= tail_bound(5.0, 7).containment_probability - 0.02


# --- ergodicity ---------------------------------------------------------------------------

def test_ergodicity_rate():
    ctx = GeometryContext(np.ones((4, 7)))
    assert ergodicity_rate(ctx, 2.2142, 1) == pytest.approx(0.9827, abs=5e-5)
    assert ergodicity_rate(ctx, 2.2142, 0) == 1.0
    assert ergodicity_rate(ctx, 128.0, 3) == 0.0
    for z, t in [(129.0, 1), (0.0, 1), (1.0, -1), (1.0, 1.5)]:
        with pytest.raises(DomainError):
            ergodicity_rate(ctx, z, t)


# --- exact radial sampler -------------------------------------------------------------------

def test_radial_sampler_p1_truncated_normal():
    # density exp(-(a r + b)^2/2) on r > 0 with a = 2, b = omega
    ctx = GeometryContext([[2.0]], [0.5])
    s = np.array([1.0])
    a, b = 2.0, (1.0 - 2.0 * 0.5) / 2.0
    r = radial_exact_sampler(ctx, s, 50_000, seed=3)
    law = stats.truncnorm(b, np.inf, loc=-b / a, scale=1 / a)
    assert abs(r.mean() - law.mean()) <= 3 * law.std() / math.sqrt(len(r))
    assert stats.kstest(r, law.cdf).statistic <= 0.01


@pytest.mark.parametrize("p, omega_sign", [(2, 1), (3, -1), (7, 1), (12, 0)])
def test_radial_sampler_kolmogorov(p, omega_sign):
    rng = np.random.default_rng(p)
    A = rng.normal(size=(2, p))
    s = rng.normal(size=p)
    s /= np.abs(s).sum()
    As = A @ s
    # choose y so that omega has the requested sign
    y = omega_sign * 2.0 * As / (As @ As) if omega_sign else As / (As @ As)
    ctx = GeometryContext(A, y)
    a = float(np.linalg.norm(As))
    w = (1 - float(As @ y)) / a
    dens = lambda r: math.exp(-0.5 * (a * r + w) ** 2 + (p - 1) * math.log(r)) if r > 0 else 0.0
    r0 = concentration_radius(ctx, s)
    edges = np.union1d(np.linspace(0.0, 12 * r0 + 20 / a, 4001), [r0])
    mass = [integrate.quad(dens, lo, hi, epsabs=0, epsrel=1e-12)[0] for lo, hi in zip(edges[:-1], edges[1:])]
    table = np.concatenate([[0.0], np.cumsum(mass)])
    cdf = lambda x: np.interp(x, edges, table / table[-1])

    # the tabulated CDF itself is exact to quadrature accuracy
    pts, table_cdf = _radial_cdf_table(w, p)
    r_nodes = pts / a
    cell = [integrate.quad(dens, lo, hi, epsabs=0, epsrel=1e-12)[0] for lo, hi in zip(r_nodes[:-1], r_nodes[1:])]
    head = integrate.quad(dens, 0, r_nodes[0])[0] if r_nodes[0] > 0 else 0.0
    exact = head + np.concatenate([[0.0], np.cumsum(cell)])
    assert np.max(np.abs(table_cdf - exact / table[-1])) <= 1e-9

    # KS at n = 1e4 is a random quantity (about 27% of exact samples exceed 0.01);
    # check its distribution over seeds instead of one draw
    ks = [kolmogorov(radial_exact_sampler(ctx, s, 10_000, seed=100 * p + k), cdf) for k in range(20)]
    assert np.median(ks) <= 0.01
    assert max(ks) <= 0.02


def test_radial_sampler_mode_near_radius():
    ctx = GeometryContext([[1.0, 1.0]])
    s = np.array([1.0, 0.0])
    r = radial_exact_sampler(ctx, s, 200_000, seed=0)
    hist, edges = np.histogram(r, bins=np.linspace(0, 3, 61))
    mode = 0.5 * (edges[hist.argmax()] + edges[hist.argmax() + 1])
    assert mode == pytest.approx(concentration_radius(ctx, s), abs=0.1)
    assert np.mean(r >= 2 * concentration_radius(ctx, s)) <= tail_bound(2, 2).tail_bound


def test_radial_sampler_errors_and_determinism():
    ctx = GeometryContext([[1.0, 1.0]])
    with pytest.raises(SingularDirectionError):
        radial_exact_sampler(ctx, [1.0, -1.0], 10, seed=0)
    with pytest.raises(DomainError):
        radial_exact_sampler(ctx, [1.0, 0.0], 0, seed=0)
    assert np.array_equal(radial_exact_sampler(ctx, [1.0, 0.0], 100, 5), radial_exact_sampler(ctx, [1.0, 0.0], 100, 5))


# --- mean estimator -------------------------------------------------------------------------

def test_mean_estimator():
    v = np.array([1.0, -2.0])
    assert mean_estimator(ChainResult(np.tile(v, (5, 1)), 0, RANDOM_WALK, 0)).tolist() == v.tolist()
    assert mean_estimator(ChainResult(np.array([v, -v]), 1, RANDOM_WALK, 0)).tolist() == [0.0, 0.0]
    chain = ChainResult(np.array([[9.0, 9.0], v]), 1, RANDOM_WALK, 0)
    assert mean_estimator(chain, burn_in=1).tolist() == v.tolist()
    with pytest.raises(DomainError):
        mean_estimator(chain, burn_in=2)
    with pytest.raises(DomainError):
        mean_estimator(chain, burn_in=-1)
