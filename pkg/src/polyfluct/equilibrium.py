"""Boltzmann equilibrium of the anchored chain.

The joint density factorizes over subunit extensions ``z_k = x_k - x_{k-1}``
(with ``x_0 = 0``), so every equilibrium quantity reduces to the single
subunit density ``p(z) = exp(-phi(z)/kBT) / z_1``: the end-to-end marginal
is its N-fold convolution and exact sampling draws N iid extensions.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DomainViolation, GridTooCoarse
from .grid import DensityField, Grid
from .potential import CoordinateDomain, DomainKind, log_subunit_partition

GAUSS_NODES = 16
SAMPLING_CELLS = 2**14
COVERAGE_TOL = 1e-9
UNAVAILABLE_DENSITY = 1e-300


@dataclass(frozen=True)
class ChainModel:
    N: int
    phi: object
    kBT: float = 1.0
    eta: float = 1.0
    domain: CoordinateDomain = field(default_factory=CoordinateDomain)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not self.kBT > 0:
            raise ValueError("kBT must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @property
    def diffusivity(self):
        return self.kBT / self.eta


@dataclass(frozen=True, eq=False)
class ChainState:
    """Junction positions ``(x_1, ..., x_N)``; the anchor ``x_0 = 0`` is implicit."""

    junctions: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        x = np.array(self.junctions, dtype=float).reshape(-1)
        x.setflags(write=False)
        object.__setattr__(self, "junctions", x)

    @property
    def extensions(self):
        return extensions_of(self.junctions)


def extensions_of(junctions):
    """Subunit extensions along the last axis, anchoring ``x_0 = 0``."""
    x = np.asarray(junctions, dtype=float)
    return np.diff(x, axis=-1, prepend=0.0)


def junctions_of(extensions):
    return np.cumsum(np.asarray(extensions, dtype=float), axis=-1)


def check_extensions(chain, z):
    """Raise DomainViolation if any extension is outside the chain's domain."""
    bad = ~chain.domain.contains(z)
    if np.any(bad):
        raise DomainViolation(f"extensions outside {chain.domain.kind.value}: {np.asarray(z)[bad][:5]}")


def log_cell_weights(phi, kBT, edges):
    """ln of the integral of exp(-phi/kBT) over each cell between ``edges``.

    Gauss-Legendre on every cell, combined in the log domain so that deep
    tails never underflow.
    """
    edges = np.asarray(edges, dtype=float)
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_NODES)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    x = mid + half * nodes[None, :]
    return logsumexp(-phi.value(x) / kBT + np.log(weights)[None, :], axis=1) + np.log(half[:, 0])


def cell_free_energy(phi, kBT, edges):
    """Cell potential ``-kBT ln <exp(-phi/kBT)>_cell``.

    Using this in place of point values of phi makes the cell-averaged
    Boltzmann density the exact discrete equilibrium.
    """
    edges = np.asarray(edges, dtype=float)
    return -kBT * (log_cell_weights(phi, kBT, edges) - np.log(np.diff(edges)))


@functools.lru_cache(maxsize=64)
def cell_potential(chain, grid):
    """Cell potential of the chain on a grid in extension coordinates.

    A 1-D grid holds ``z_1`` for N = 1; a 2-D grid holds ``(z_1, z_2)`` for
    N = 2, where U separates into ``phi(z_1) + phi(z_2)``.
    """
    if grid.dim != chain.N:
        raise ValueError(f"grid dimension {grid.dim} does not match N = {chain.N}")
    parts = [cell_free_energy(chain.phi, chain.kBT, e) for e in grid.edges]
    U = parts[0] if grid.dim == 1 else parts[0][:, None] + parts[1][None, :]
    U.setflags(write=False)
    return U


def boltzmann_density(chain, grid):
    """Cell-averaged Boltzmann density normalized on the grid itself."""
    log_w = -cell_potential(chain, grid) / chain.kBT
    return DensityField(grid, np.exp(log_w - logsumexp(log_w)) / grid.cell_volume)


def log_grid_partition(chain, grid):
    """ln of the Boltzmann integral restricted to the grid."""
    return float(logsumexp(-cell_potential(chain, grid) / chain.kBT) + math.log(grid.cell_volume))


def partition_function(chain):
    """ln Z = N ln z; kept in the log domain because z**N overflows."""
    return chain.N * log_subunit_partition(chain.phi, chain.kBT, chain.domain)


def subunit_density(chain, grid):
    """Cell-averaged single-subunit extension density on a 1-D grid."""
    if grid.dim != 1:
        raise ValueError("subunit_density needs a 1-D grid")
    log_m = log_cell_weights(chain.phi, chain.kBT, grid.edges[0])
    log_z = log_subunit_partition(chain.phi, chain.kBT, chain.domain)
    lo, _ = chain.domain.bounds
    if grid.lo[0] < lo - 1e-12:
        raise DomainViolation(f"grid starts at {grid.lo[0]} below the domain bound {lo}")
    coverage = math.exp(logsumexp(log_m) - log_z)
    if coverage < 1.0 - COVERAGE_TOL:
        raise GridTooCoarse(f"grid holds only {coverage:.12f} of the subunit mass")
    return DensityField(grid, np.exp(log_m - logsumexp(log_m)) / grid.cell_volume)


def joint_log_density(chain, state):
    """Log Boltzmann density of junction configurations.

    ``state`` may be a ChainState or an array whose last axis holds the N
    junctions; the result broadcasts over leading axes.
    """
    x = state.junctions if isinstance(state, ChainState) else np.asarray(state, dtype=float)
    if x.shape[-1] != chain.N:
        raise ValueError(f"expected {chain.N} junctions, got {x.shape[-1]}")
    z = extensions_of(x)
    check_extensions(chain, z)
    energy = np.sum(chain.phi.value(z), axis=-1)
    out = -energy / chain.kBT - partition_function(chain)
    return float(out) if np.ndim(out) == 0 else out


def convolve(f, g):
    """Density of the sum of independent variables with 1-D densities f and g.

    Cell masses are treated as point masses at cell centres, so the result
    lives on the grid starting at ``lo_f + lo_g + h / 2`` with
    ``n_f + n_g - 1`` cells. Both inputs must share the same spacing.
    """
    if f.dim != 1 or g.dim != 1:
        raise ValueError("convolve needs 1-D densities")
    h = f.grid.spacing[0]
    if not math.isclose(h, g.grid.spacing[0], rel_tol=1e-12):
        raise ValueError("densities must share the same cell width")
    m = np.clip(np.convolve(f.masses, g.masses), 0.0, None)
    lo = f.grid.lo[0] + g.grid.lo[0] + 0.5 * h
    grid = Grid.uniform(lo, lo + m.size * h, m.size)
    return DensityField(grid, m / m.sum() / h)


def subunit_grid(chain, h):
    """Grid of width-``h`` cells starting at the domain's lower bound and covering its cutoff."""
    lo, hi = chain.domain.bounds
    n = int(math.ceil((hi - lo) / h - 1e-9))
    return Grid.uniform(lo, lo + n * h, n)


def end_grid(chain, h):
    """Grid on which N-fold lattice convolution of ``subunit_grid(chain, h)`` lands exactly."""
    sub = subunit_grid(chain, h)
    N, n = chain.N, sub.n[0]
    lo = N * sub.lo[0] + 0.5 * (N - 1) * h
    cells = N * (n - 1) + 1
    return Grid.uniform(lo, lo + cells * h, cells)


def end_marginal(chain, grid, refine=1):
    """Density of the free end ``x_N`` on a uniform 1-D grid.

    Extension masses on a lattice of spacing ``h / refine`` are convolved
    N - 1 times by direct summation, so tails stay exact down to underflow.
    The lattice law is then spread uniformly over its cells and integrated
    onto ``grid`` through the CDF; on ``end_grid(chain, h)`` with
    ``refine = 1`` this is an exact re-indexing.
    """
    if grid.dim != 1:
        raise ValueError("end_marginal needs a 1-D grid")
    if chain.N == 1:
        return subunit_density(chain, grid)
    h = grid.spacing[0] / refine
    sub = subunit_grid(chain, h)
    log_m = log_cell_weights(chain.phi, chain.kBT, sub.edges[0])
    q = np.exp(log_m - logsumexp(log_m))
    m = q
    for _ in range(chain.N - 1):
        m = np.convolve(m, q)
    m = np.clip(m, 0.0, None)
    first = chain.N * sub.lo[0] + 0.5 * (chain.N - 1) * h
    nodes = first + h * np.arange(m.size + 1)
    cum = np.concatenate([[0.0], np.cumsum(m)])
    cum /= cum[-1]
    cells = np.diff(np.interp(grid.edges[0], nodes, cum))
    inside = cells.sum()
    if inside < 1.0 - COVERAGE_TOL:
        raise GridTooCoarse(f"end marginal leaks {1.0 - inside:.3g} outside [{grid.lo[0]}, {grid.hi[0]}]")
    return DensityField(grid, cells / inside / grid.cell_volume)


@dataclass(frozen=True, eq=False)
class FreeEnergyProfile:
    """F(x_N) per cell; NaN marks cells whose density underflows."""

    grid: Grid
    values: np.ndarray

    @property
    def available(self):
        return np.isfinite(self.values)

    def argmin(self):
        return int(np.nanargmin(self.values))


def end_free_energy(chain, grid, refine=1):
    rho = end_marginal(chain, grid, refine=refine).values
    F = np.full(rho.shape, np.nan)
    ok = rho >= UNAVAILABLE_DENSITY
    F[ok] = -chain.kBT * np.log(rho[ok])
    return FreeEnergyProfile(grid, F)


@functools.lru_cache(maxsize=32)
def _inverse_cdf_table(phi, kBT, domain):
    lo, hi = domain.bounds
    edges = np.linspace(lo, hi, SAMPLING_CELLS + 1)
    log_m = log_cell_weights(phi, kBT, edges)
    cum = np.concatenate([[0.0], np.cumsum(np.exp(log_m - logsumexp(log_m)))])
    cum /= cum[-1]
    return cum, edges


def sample_extensions(chain, size, rng):
    """Draw ``size`` independent chains as an array of shape ``(size, N)``."""
    cum, edges = _inverse_cdf_table(chain.phi, chain.kBT, chain.domain)
    u = rng.random((size, chain.N))
    return np.interp(u, cum, edges)


def sample_chains(chain, size, rng):
    return junctions_of(sample_extensions(chain, size, rng))


def sample_chain(chain, rng):
    return ChainState(sample_chains(chain, 1, rng)[0])
