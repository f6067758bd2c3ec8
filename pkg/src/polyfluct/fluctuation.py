"""Empirical measures of subunit extensions and their free energies.

A chain configuration defines a histogram of its N extensions. Its
probability is multinomial in the bin probabilities of the subunit
density, and ``-kBT`` times the log-probability ratio against the most
typical composition approaches ``N kBT H[nu | p]`` for large N.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .errors import LengthMismatch, NonIntegerCounts, OutOfRange
from .grid import Grid

PROB_TOL = 1e-12
COUNT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BinGrid:
    """Uniform bins given by their edges."""

    edges: np.ndarray

    def __post_init__(self):
        grid = Grid.from_edges(self.edges)
        edges = np.array(grid.edges[0])
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def uniform(cls, lo, hi, m):
        return cls(np.linspace(lo, hi, m + 1))

    @property
    def m(self):
        return self.edges.size - 1

    @property
    def width(self):
        return float(self.edges[1] - self.edges[0])

    @property
    def grid(self):
        return Grid.uniform(self.edges[0], self.edges[-1], self.m)


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    bins: BinGrid
    nu: np.ndarray
    N: int

    def __post_init__(self):
        nu = np.array(self.nu, dtype=float)
        if nu.shape != (self.bins.m,):
            raise LengthMismatch(f"nu has {nu.size} entries for {self.bins.m} bins")
        if abs(nu.sum() - 1.0) > PROB_TOL or np.any(nu < 0):
            raise ValueError("nu must be a probability vector")
        nu.setflags(write=False)
        object.__setattr__(self, "nu", nu)

    @classmethod
    def from_counts(cls, bins, counts):
        counts = np.asarray(counts)
        N = int(counts.sum())
        return cls(bins, counts / N, N)

    @property
    def counts(self):
        """Integer occupation numbers; raises if ``N * nu`` is not integral."""
        c = self.N * self.nu
        r = np.rint(c)
        if np.any(np.abs(c - r) > COUNT_TOL * max(1, self.N)):
            raise NonIntegerCounts(f"N * nu = {c} is not integral")
        return r.astype(np.int64)


def as_prob_vector(p):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > PROB_TOL:
        raise ValueError("not a probability vector (non-negative, summing to 1)")
    return p


def empirical_measure(state, bins):
    """Histogram of a configuration's subunit extensions.

    ``state`` is a ChainState or a 1-D array of junction positions.
    """
    x = getattr(state, "junctions", state)
    z = np.diff(np.asarray(x, dtype=float), prepend=0.0)
    return EmpiricalMeasure.from_counts(bins, extension_counts(z[None, :], bins)[0])


def extension_counts(extensions, bins):
    """Per-row bin counts for an ``(R, N)`` array of extensions.

    The top edge is closed so an extension sitting exactly on it is kept.
    """
    z = np.asarray(extensions, dtype=float)
    lo, hi = bins.edges[0], bins.edges[-1]
    outside = (z < lo) | (z > hi)
    if np.any(outside):
        raise OutOfRange(z[outside])
    idx = np.clip(np.searchsorted(bins.edges, z, side="right") - 1, 0, bins.m - 1)
    counts = np.zeros((z.shape[0], bins.m), dtype=np.int64)
    np.add.at(counts, (np.arange(z.shape[0])[:, None], idx), 1)
    return counts


def bin_probabilities(density, bins):
    """Bin masses p_n of a 1-D DensityField, renormalized over the bins."""
    mass = np.diff(density.cdf(bins.edges))
    return mass / mass.sum()


def gibbs_entropy(p):
    p = as_prob_vector(p)
    nz = p > 0
    return float(-np.sum(p[nz] * np.log(p[nz])))


def relative_entropy(nu, p):
    """H[nu | p] in nats; ``inf`` when nu is not absolutely continuous wrt p."""
    nu = np.asarray(getattr(nu, "nu", nu), dtype=float)
    p = np.asarray(p, dtype=float)
    if nu.shape != p.shape:
        raise LengthMismatch(f"lengths differ: {nu.shape} vs {p.shape}")
    support = nu > 0
    if np.any(p[support] == 0):
        return math.inf
    return float(np.sum(nu[support] * np.log(nu[support] / p[support])))


def multinomial_log_prob(mu, p):
    """ln[N! / prod(N nu_n)!] + sum N nu_n ln p_n, via log-gamma."""
    p = as_prob_vector(p)
    counts = mu.counts
    if counts.shape != p.shape:
        raise LengthMismatch(f"lengths differ: {counts.shape} vs {p.shape}")
    return _log_multinomial(counts, p)


def _log_multinomial(counts, p):
    occupied = counts > 0
    if np.any(p[occupied] == 0):
        return -math.inf
    log_coeff = gammaln(counts.sum() + 1) - np.sum(gammaln(counts + 1))
    return float(log_coeff + np.sum(counts[occupied] * np.log(p[occupied])))


def fluctuation_free_energy(mu, p, kBT):
    return mu.N * kBT * relative_entropy(mu.nu, p)


def nearest_composition(p, N):
    """Integer counts summing to N closest to ``N * p`` by largest remainder.

    Ties in the remainder go to the lower index.
    """
    p = as_prob_vector(p)
    target = N * p
    base = np.floor(target).astype(np.int64)
    short = int(N - base.sum())
    rem = target - base
    order = np.lexsort((np.arange(p.size), -rem))
    base[order[:short]] += 1
    return base


class SanovGap(NamedTuple):
    exact: float
    stirling: float
    gap: float


def sanov_gap(mu, p, kBT):
    """Exact multinomial free-energy difference against its Stirling limit.

    ``exact`` compares the configuration with the integer composition
    nearest to ``N p``; ``stirling`` is ``N kBT H[nu | p]``.
    """
    p = as_prob_vector(p)
    ref = nearest_composition(p, mu.N)
    exact = -kBT * (multinomial_log_prob(mu, p) - _log_multinomial(ref, p))
    stirling = fluctuation_free_energy(mu, p, kBT)
    return SanovGap(exact, stirling, exact - stirling)


def sanov_sweep(nu, p, Ns, kBT, bins=None):
    """sanov_gap for a fixed measure ``nu`` at each sample size in ``Ns``.

    Returns rows ``(N, exact, stirling, gap)``; ``N * nu`` must be integral
    for every N.
    """
    nu = as_prob_vector(nu)
    bins = bins or BinGrid.uniform(0.0, float(nu.size), nu.size)
    rows = []
    for N in Ns:
        mu = EmpiricalMeasure(bins, nu, int(N))
        rows.append((int(N), *sanov_gap(mu, p, kBT)))
    return rows
