import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from polyfluct import (
    ChainModel,
    ChainState,
    CoordinateDomain,
    DensityField,
    DomainKind,
    DoubleWell,
    Ensemble,
    FPSolverConfig,
    Grid,
    Harmonic,
    LangevinConfig,
    Scheme,
    SoftWallHarmonic,
    boltzmann_density,
    chain_force,
    chain_potential,
    fp_step,
    gaussian_density,
    langevin_step,
    relax,
    subunit_density,
)
from polyfluct.dynamics import get_solver, stability_bound
from polyfluct.errors import StabilityViolation
from polyfluct.grid import histogram_density

from conftest import Flat

FULL8 = CoordinateDomain(DomainKind.FULL_LINE, 8.0)


def harmonic(N=1, domain=FULL8, **kw):
    return ChainModel(N, Harmonic(**kw), domain=domain)


def test_chain_potential_examples():
    c = harmonic(2)
    assert chain_potential(c, ChainState([1.0, 1.0])) == pytest.approx(0.5)
    rest = ChainModel(3, Harmonic(x0=0.7), domain=FULL8)
    assert chain_potential(rest, ChainState([0.7, 1.4, 2.1])) == pytest.approx(0.0)
    dw = ChainModel(2, DoubleWell(), domain=CoordinateDomain(DomainKind.FULL_LINE, 5))
    one = ChainModel(1, DoubleWell(), domain=CoordinateDomain(DomainKind.FULL_LINE, 5))
    assert chain_potential(dw, [0.3, -0.9]) == pytest.approx(chain_potential(one, [0.3]) + chain_potential(one, [-1.2]))


def test_chain_force_examples():
    np.testing.assert_allclose(chain_force(ChainModel(3, Harmonic(x0=0.5), domain=FULL8), [0.5, 1.0, 1.5]), 0.0)
    np.testing.assert_allclose(chain_force(harmonic(), [2.0]), [-2.0])


@given(z=arrays(float, 4, elements=st.floats(-1.5, 1.5)))
@settings(max_examples=100, deadline=None)
def test_chain_force_is_minus_gradient(z):
    c = ChainModel(4, DoubleWell(), domain=CoordinateDomain(DomainKind.FULL_LINE, 10))
    x = np.cumsum(z)
    h = 1e-6
    fd = np.array([(chain_potential(c, x - h * e) - chain_potential(c, x + h * e)) / (2 * h) for e in np.eye(4)])
    f = chain_force(c, x)
    assert np.all(np.abs(fd - f) <= 1e-6 * np.maximum(1.0, np.abs(f)))


def test_langevin_cold_chain_at_rest_is_unchanged():
    c = ChainModel(3, Harmonic(x0=1.0), kBT=1e-300, domain=FULL8)
    E = Ensemble(np.tile([1.0, 2.0, 3.0], (50, 1)), seed=1)
    np.testing.assert_array_equal(langevin_step(E, c, 0.01).positions, E.positions)


def test_langevin_ou_variance():
    c = harmonic()
    E = Ensemble(np.zeros((100_000, 1)), seed=4)
    dt, t = 1e-3, 0.5
    for _ in range(int(round(t / dt))):
        E = langevin_step(E, c, dt)
    x = E.positions[:, 0]
    var = 1 - math.exp(-2 * t)
    se = var * math.sqrt(2 / x.size)
    assert abs(x.var() - var) < 4 * se


def test_half_line_long_time_histogram_matches_boltzmann():
    c = ChainModel(1, Harmonic(x0=1.0), domain=CoordinateDomain(DomainKind.HALF_LINE, 8.0))
    E = Ensemble.gaussian(c, 20_000, 8, 3.0, 0.3)
    for _ in range(2000):
        E = langevin_step(E, c, 2e-3)
    z = E.extensions[:, 0]
    assert z.min() >= 0
    p = subunit_density(c, Grid.uniform(0, 8, 4000))
    edges = np.interp(np.linspace(0, 1, 21), p.cdf(p.grid.edges[0]), p.grid.edges[0])
    edges[0], edges[-1] = 0, 8
    counts, _ = np.histogram(z, edges)
    expected = np.diff(p.cdf(edges)) * z.size
    assert stats.chisquare(counts, expected * counts.sum() / expected.sum()).pvalue > 0.01


def test_langevin_independent_of_worker_count():
    c = ChainModel(2, DoubleWell(), domain=CoordinateDomain(DomainKind.FULL_LINE, 5))
    runs = []
    for workers in (1, 4):
        E = Ensemble.equilibrium(c, 20_000, 99)
        for _ in range(5):
            E = langevin_step(E, c, 1e-3, workers=workers)
        runs.append(E.positions)
    np.testing.assert_array_equal(*runs)


def test_ensemble_constructors_reproducible():
    c = harmonic(3)
    a = Ensemble.equilibrium(c, 10_000, 5).positions
    assert np.array_equal(a, Ensemble.equilibrium(c, 10_000, 5).positions)
    assert not np.array_equal(a, Ensemble.equilibrium(c, 10_000, 6).positions)
    half = ChainModel(2, Harmonic(), domain=CoordinateDomain(DomainKind.HALF_LINE, 8))
    assert np.all(Ensemble.gaussian(half, 1000, 1, 0.0, 1.0).extensions >= 0)


@pytest.mark.parametrize("scheme", list(Scheme))
@pytest.mark.parametrize("chain,grid", [
    (ChainModel(1, DoubleWell(), domain=CoordinateDomain(DomainKind.FULL_LINE, 3)), Grid.uniform(-3, 3, 200)),
    (ChainModel(1, SoftWallHarmonic(), domain=CoordinateDomain(DomainKind.HALF_LINE, 6)), Grid.uniform(0, 6, 200)),
    (ChainModel(2, Harmonic(k=2), domain=CoordinateDomain(DomainKind.FULL_LINE, 4)), Grid.square(-4, 4, 40)),
])
def test_fp_step_conserves_mass_and_sign(chain, grid, scheme):
    cfg = FPSolverConfig.for_chain(chain, grid, scheme=scheme)
    P = gaussian_density(grid, 0.8, 0.4)
    for _ in range(300):
        Q = fp_step(P, chain, cfg)
        assert abs(Q.masses.sum() - P.masses.sum()) < 1e-12
        assert Q.values.min() >= 0
        P = Q


def test_boltzmann_is_stationary():
    c = ChainModel(1, DoubleWell(), domain=CoordinateDomain(DomainKind.FULL_LINE, 3))
    g = Grid.uniform(-3, 3, 256)
    cfg = FPSolverConfig.for_chain(c, g)
    P0 = P = boltzmann_density(c, g)
    assert fp_step(P, c, cfg).l1_distance(P) < 1e-8
    for _ in range(10_000):
        P = fp_step(P, c, cfg)
    assert P.l1_distance(P0) < 1e-6


def test_boltzmann_is_stationary_in_two_dimensions():
    c = ChainModel(2, DoubleWell(), domain=CoordinateDomain(DomainKind.FULL_LINE, 3))
    g = Grid.square(-3, 3, 48)
    cfg = FPSolverConfig.for_chain(c, g)
    P0 = boltzmann_density(c, g)
    res = relax(P0, c, cfg, 500 * cfg.dt)
    assert res.final.l1_distance(P0) < 1e-10


def test_flat_potential_relaxes_to_uniform():
    c = ChainModel(1, Flat(), domain=CoordinateDomain(DomainKind.HALF_LINE, 2.0))
    g = Grid.uniform(0, 2, 64)
    P = gaussian_density(g, 0.3, 0.1)
    res = relax(P, c, FPSolverConfig.for_chain(c, g), 8.0)
    np.testing.assert_allclose(res.final.values, 0.5, rtol=1e-6)


def test_fp_ou_variance_trajectory():
    c = harmonic()
    g = Grid.uniform(-8, 8, 512)
    cfg = FPSolverConfig.for_chain(c, g)
    s0 = 0.5
    res = relax(gaussian_density(g, 2.0, s0), c, cfg, 2.0, lambda t, P: (t, P.variance()), every=500)
    for t, v in res.records:
        exact = 1 - math.exp(-2 * t) + s0**2 * math.exp(-2 * t)
        assert v == pytest.approx(exact, rel=1e-2)


def test_stability_violation_reports_suggestion():
    c = harmonic()
    g = Grid.uniform(-8, 8, 512)
    bound = stability_bound(c, g)
    with pytest.raises(StabilityViolation) as info:
        FPSolverConfig.for_chain(c, g, dt=2 * bound)
    assert info.value.suggested_dt < bound
    cfg = FPSolverConfig(2 * bound, g)
    with pytest.raises(StabilityViolation):
        fp_step(boltzmann_density(c, g), c, cfg)


def test_solver_rejects_unsupported_shapes():
    with pytest.raises(ValueError):
        get_solver(harmonic(3), Grid.square(-1, 1, 4))
    with pytest.raises(ValueError):
        FPSolverConfig(0.1, Grid((0, 0), (1, 2), (4, 4)))


def test_relax_zero_time_returns_initial():
    c = harmonic()
    g = Grid.uniform(-8, 8, 64)
    P = gaussian_density(g, 1.0, 1.0)
    res = relax(P, c, FPSolverConfig.for_chain(c, g), 0.0, lambda t, Q: t)
    assert res.final is P and res.records == [0.0]
    E = Ensemble(np.ones((10, 1)), seed=0)
    assert relax(E, c, LangevinConfig(1e-3), 0.0).final is E


def test_relax_lands_on_final_time():
    c = harmonic()
    g = Grid.uniform(-8, 8, 64)
    cfg = FPSolverConfig.for_chain(c, g)
    res = relax(gaussian_density(g, 1.0, 1.0), c, cfg, 0.123, every=7)
    assert res.times[0] == 0.0 and res.times[-1] == 0.123
    assert all(b > a for a, b in zip(res.times, res.times[1:]))


def test_langevin_and_fp_agree_for_single_subunit():
    c = harmonic()
    g = Grid.uniform(-8, 8, 256)
    t = 1.0
    fp = relax(gaussian_density(g, 2.0, 0.5), c, FPSolverConfig.for_chain(c, g), t).final
    E = relax(Ensemble.gaussian(c, 100_000, 17, 2.0, 0.5), c, LangevinConfig(1e-3), t).final
    assert histogram_density(E.positions[:, 0], g).l1_distance(fp) < 0.05
