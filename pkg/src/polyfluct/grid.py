"""Uniform rectangular grids and cell-averaged densities on them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class Grid:
    """Uniform cell grid in one or two dimensions.

    Stored as per-axis ``(lo, hi, n)`` so instances are hashable and can key
    operator caches.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        # 12 significant digits so grids built along different float paths compare equal
        lo = tuple(float(f"{v:.12g}") for v in np.atleast_1d(self.lo))
        hi = tuple(float(f"{v:.12g}") for v in np.atleast_1d(self.hi))
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        if not (len(lo) == len(hi) == len(n)) or len(n) not in (1, 2):
            raise ValueError("grid must have 1 or 2 axes with matching lo/hi/n")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ValueError("grid upper bounds must exceed lower bounds")
        if any(k < 1 for k in n):
            raise ValueError("grid needs at least one cell per axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)

    @classmethod
    def uniform(cls, lo, hi, n):
        return cls((lo,), (hi,), (n,))

    @classmethod
    def square(cls, lo, hi, n):
        """Two-dimensional grid with identical axes."""
        return cls((lo, lo), (hi, hi), (n, n))

    @classmethod
    def from_edges(cls, edges, rtol=1e-12):
        """Build a 1-D grid from explicit edges, which must be uniformly spaced."""
        edges = np.asarray(edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2:
            raise ValueError("edges must be a 1-D array with at least two entries")
        widths = np.diff(edges)
        if np.any(widths <= 0):
            raise ValueError("edges must be strictly increasing")
        h = (edges[-1] - edges[0]) / (edges.size - 1)
        if np.max(np.abs(widths - h)) > rtol * max(abs(h), np.max(np.abs(edges))):
            raise ValueError("edges must be uniformly spaced")
        return cls.uniform(edges[0], edges[-1], edges.size - 1)

    @property
    def dim(self):
        return len(self.n)

    @property
    def shape(self):
        return self.n

    @property
    def spacing(self):
        return tuple((b - a) / k for a, b, k in zip(self.lo, self.hi, self.n))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def edges(self):
        return tuple(np.linspace(a, b, k + 1) for a, b, k in zip(self.lo, self.hi, self.n))

    @property
    def centers(self):
        return tuple(a + (np.arange(k) + 0.5) * h
                     for a, k, h in zip(self.lo, self.n, self.spacing))

    def mesh(self):
        """Cell-center coordinate arrays with ``indexing='ij'``."""
        return np.meshgrid(*self.centers, indexing="ij")

    def coarsen(self, factor):
        if any(k % factor for k in self.n):
            raise ValueError(f"cell counts {self.n} not divisible by {factor}")
        return Grid(self.lo, self.hi, tuple(k // factor for k in self.n))


@dataclass(frozen=True, eq=False)
class DensityField:
    """Non-negative cell-averaged probability density, normalized on its grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("density values must be finite and non-negative")
        mass = values.sum() * self.grid.cell_volume
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"density not normalized: mass = {mass!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def normalized(cls, grid, values):
        values = np.clip(np.asarray(values, dtype=float), 0.0, None)
        total = values.sum() * grid.cell_volume
        if not total > 0:
            raise ValueError("cannot normalize a density with zero mass")
        return cls(grid, values / total)

    @property
    def dim(self):
        return self.grid.dim

    @property
    def masses(self):
        return self.values * self.grid.cell_volume

    def mean(self, axis=0):
        return float(np.sum(self.grid.mesh()[axis] * self.masses))

    def variance(self, axis=0):
        x = self.grid.mesh()[axis]
        mu = np.sum(x * self.masses)
        return float(np.sum((x - mu) ** 2 * self.masses))

    def cdf(self, x):
        """Exact CDF of a 1-D piecewise-constant density, evaluated at ``x``."""
        if self.dim != 1:
            raise ValueError("cdf is defined for 1-D densities only")
        cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        return np.interp(x, self.grid.edges[0], cum)

    def l1_distance(self, other):
        if other.grid != self.grid:
            raise ValueError("densities live on different grids")
        return float(np.sum(np.abs(self.values - other.values)) * self.grid.cell_volume)

    def coarsen(self, factor):
        """Merge ``factor`` cells per axis, preserving cell masses."""
        coarse = self.grid.coarsen(factor)
        m = self.masses
        if self.dim == 1:
            m = m.reshape(-1, factor).sum(axis=1)
        else:
            a, b = coarse.n
            m = m.reshape(a, factor, b, factor).sum(axis=(1, 3))
        return DensityField(coarse, m / coarse.cell_volume)


def histogram_density(samples, grid):
    """Cell-averaged density of samples binned on ``grid``.

    Samples outside the grid are dropped before normalization.
    """
    samples = np.asarray(samples, dtype=float)
    if grid.dim == 1:
        counts, _ = np.histogram(samples.ravel(), bins=grid.edges[0])
    else:
        counts, _, _ = np.histogram2d(samples[:, 0], samples[:, 1], bins=grid.edges)
    return DensityField.normalized(grid, counts)
