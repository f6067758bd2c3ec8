import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyfluct import (
    BinGrid,
    ChainModel,
    ChainState,
    EmpiricalMeasure,
    empirical_measure,
    fluctuation_free_energy,
    gibbs_entropy,
    multinomial_log_prob,
    relative_entropy,
    sanov_gap,
)
from polyfluct.errors import LengthMismatch, NonIntegerCounts, OutOfRange
from polyfluct.fluctuation import extension_counts, nearest_composition, sanov_sweep


def probs(m):
    return st.lists(st.floats(0.01, 1.0), min_size=m, max_size=m).map(lambda v: np.array(v) / sum(v))


def exact_multinomial(counts, p):
    """Multinomial probability in exact rational arithmetic."""
    out = Fraction(math.factorial(int(sum(counts))))
    for c, q in zip(map(int, counts), p):
        out *= Fraction(q) ** c / math.factorial(c)
    return out


def compositions(N, m):
    for cut in itertools.combinations(range(N + m - 1), m - 1):
        bounds = (-1,) + cut + (N + m - 1,)
        yield np.array([bounds[i + 1] - bounds[i] - 1 for i in range(m)])


BINS2 = BinGrid.uniform(0.0, 2.0, 2)


def measure(counts, bins=None):
    counts = np.asarray(counts)
    return EmpiricalMeasure.from_counts(bins or BinGrid.uniform(0.0, 1.0, counts.size), counts)


def test_empirical_measure_examples():
    mu = empirical_measure(ChainState([0.5, 2.0]), BINS2)
    np.testing.assert_allclose(mu.nu, [0.5, 0.5])
    assert mu.N == 2
    one = empirical_measure(ChainState([0.2, 0.5, 0.9]), BINS2)
    np.testing.assert_allclose(one.nu, [1.0, 0.0])
    with pytest.raises(OutOfRange):
        empirical_measure(ChainState([0.5, 3.0]), BINS2)


def test_top_edge_is_closed():
    np.testing.assert_array_equal(extension_counts([[2.0, 0.0]], BINS2), [[1, 1]])


def test_expected_occupation_matches_bin_masses():
    from polyfluct.equilibrium import sample_extensions
    from polyfluct import CoordinateDomain, DomainKind, Grid, Harmonic, subunit_density
    from polyfluct.fluctuation import bin_probabilities

    c = ChainModel(50, Harmonic(), domain=CoordinateDomain(DomainKind.FULL_LINE, 8.0))
    bins = BinGrid.uniform(-8, 8, 8)
    p = bin_probabilities(subunit_density(c, Grid.uniform(-8, 8, 1024)), bins)
    counts = extension_counts(sample_extensions(c, 2000, np.random.default_rng(2)), bins)
    nu = counts / c.N
    se = np.sqrt(p * (1 - p) / (c.N * nu.shape[0]))
    assert np.all(np.abs(nu.mean(axis=0) - p) <= 4 * se)


def test_gibbs_entropy_examples():
    assert gibbs_entropy(np.full(4, 0.25)) == pytest.approx(math.log(4))
    assert gibbs_entropy([0, 1, 0]) == 0.0
    assert gibbs_entropy([0.25, 0.75]) == pytest.approx(0.5623, abs=1e-4)


@given(p=probs(5))
@settings(max_examples=50, deadline=None)
def test_gibbs_entropy_bounded(p):
    assert -1e-12 <= gibbs_entropy(p) <= math.log(5) + 1e-12


def test_relative_entropy_examples():
    p = np.array([0.25, 0.75])
    assert relative_entropy(p, p) == 0.0
    assert relative_entropy([0.5, 0.5], p) == pytest.approx(0.5 * math.log(4 / 3))
    assert relative_entropy([1, 0], [0, 1]) == math.inf
    with pytest.raises(LengthMismatch):
        relative_entropy([0.5, 0.5], [0.2, 0.3, 0.5])


@given(nu=probs(4), p=probs(4))
@settings(max_examples=100, deadline=None)
def test_relative_entropy_nonnegative(nu, p):
    h = relative_entropy(nu, p)
    assert h >= -1e-15
    if np.allclose(nu, p, rtol=0, atol=1e-12):
        assert h < 1e-12
    assert relative_entropy(p, p) == pytest.approx(0.0, abs=1e-15)


def test_multinomial_examples():
    assert multinomial_log_prob(measure([1, 1]), [0.5, 0.5]) == pytest.approx(math.log(0.5))
    p = np.array([0.1, 0.6, 0.3])
    assert multinomial_log_prob(measure([0, 1, 0]), p) == pytest.approx(math.log(0.6))
    total = sum(math.exp(multinomial_log_prob(measure(c), [0.3, 0.7])) for c in compositions(3, 2))
    assert total == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("N", [1, 3, 7, 12, 20])
def test_multinomial_matches_rational_oracle(N):
    p = [Fraction(1, 6), Fraction(1, 3), Fraction(1, 2)]
    pf = np.array([float(q) for q in p])
    for c in compositions(N, 3):
        exact = float(exact_multinomial(c, p))
        assert math.exp(multinomial_log_prob(measure(c), pf)) == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("N,m", [(n, m) for n in range(1, 7) for m in range(2, 5)])
def test_multinomial_normalization_brute_force(N, m):
    p = np.arange(1, m + 1, dtype=float)
    p /= p.sum()
    total = math.fsum(math.exp(multinomial_log_prob(measure(c), p)) for c in compositions(N, m))
    assert abs(total - 1.0) < 1e-12


def test_non_integer_counts():
    mu = EmpiricalMeasure(BINS2, np.array([0.3, 0.7]), 5)
    with pytest.raises(NonIntegerCounts):
        multinomial_log_prob(mu, [0.5, 0.5])


def test_fluctuation_free_energy_examples():
    p = np.array([0.25, 0.75])
    assert fluctuation_free_energy(measure([25, 75]), p, 1.0) == pytest.approx(0.0, abs=1e-14)
    assert fluctuation_free_energy(measure([50, 50]), p, 1.0) == pytest.approx(14.384, abs=1e-3)
    assert fluctuation_free_energy(measure([100, 100]), p, 2.0) == pytest.approx(
        4 * fluctuation_free_energy(measure([50, 50]), p, 1.0))


def test_sanov_gap_binomial_example():
    g = sanov_gap(measure([7, 3]), [0.5, 0.5], 1.0)
    assert g.exact == pytest.approx(-math.log(120 / 252))
    assert g.stirling == pytest.approx(10 * (0.7 * math.log(1.4) + 0.3 * math.log(0.6)))
    assert g.gap == pytest.approx(g.exact - g.stirling)


def test_sanov_gap_at_reference_composition():
    p = np.array([0.2, 0.3, 0.5])
    ref = nearest_composition(p, 7)
    g = sanov_gap(measure(ref), p, 1.0)
    assert g.exact == 0.0
    assert g.gap == pytest.approx(-g.stirling)


def test_nearest_composition_ties_go_low():
    np.testing.assert_array_equal(nearest_composition([0.5, 0.5], 3), [2, 1])
    np.testing.assert_array_equal(nearest_composition([0.25, 0.25, 0.25, 0.25], 6), [2, 2, 1, 1])
    assert nearest_composition([0.1, 0.2, 0.7], 13).sum() == 13


def test_sanov_sweep_gap_per_subunit_decreases():
    p = np.array([0.05, 0.2, 0.5, 0.2, 0.05])
    nu = np.array([0.1, 0.2, 0.4, 0.2, 0.1])
    rows = sanov_sweep(nu, p, [100, 1000, 10000], 1.0)
    per = [abs(r[3]) / r[0] for r in rows]
    assert per[0] > per[1] > per[2]
    with pytest.raises(NonIntegerCounts):
        sanov_sweep(np.array([0.333, 0.667]), [0.5, 0.5], [10], 1.0)
