"""Closed-form subunit potentials and their Boltzmann integrals.

Three confining families are provided: a harmonic spring, a quartic
double well, and a harmonic spring with a soft repulsive wall at the origin
for half-line chains. All lengths, energies and times are dimensionless by
default (``kBT = 1``, ``eta = 1``).
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import NonConvergent

TAIL_MASS_TOL = 1e-12
QUAD_RTOL = 1e-10


@dataclass(frozen=True)
class Harmonic:
    """phi(x) = k/2 (x - x0)^2"""

    k: float = 1.0
    x0: float = 0.0
    name = "harmonic"

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("harmonic stiffness k must be positive")

    def value(self, x):
        return 0.5 * self.k * (np.asarray(x, dtype=float) - self.x0) ** 2

    def gradient(self, x):
        return self.k * (np.asarray(x, dtype=float) - self.x0)

    @property
    def landmarks(self):
        return (self.x0,)

    @property
    def scale(self):
        return 1.0 / math.sqrt(self.k)


@dataclass(frozen=True)
class DoubleWell:
    """phi(x) = a (x - c)^4 - b (x - c)^2, wells at c +/- sqrt(b / 2a)."""

    a: float = 1.0
    b: float = 2.0
    c: float = 0.0
    name = "double_well"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("double-well parameters a and b must be positive")

    def value(self, x):
        s = np.asarray(x, dtype=float) - self.c
        return self.a * s**4 - self.b * s**2

    def gradient(self, x):
        s = np.asarray(x, dtype=float) - self.c
        return 4.0 * self.a * s**3 - 2.0 * self.b * s

    @property
    def landmarks(self):
        w = math.sqrt(self.b / (2.0 * self.a))
        return (self.c - w, self.c, self.c + w)

    @property
    def scale(self):
        return math.sqrt(self.b / (2.0 * self.a))


@dataclass(frozen=True)
class SoftWallHarmonic:
    """Harmonic spring plus ``wall_strength * exp(-x / wall_width)``.

    The wall is steep near ``x = 0`` and negligible a few widths away, which
    keeps half-line densities small at the anchor.
    """

    k: float = 1.0
    x0: float = 1.0
    wall_strength: float = 10.0
    wall_width: float = 0.1
    name = "soft_wall_harmonic"

    def __post_init__(self):
        if not (self.k > 0 and self.wall_strength > 0 and self.wall_width > 0):
            raise ValueError("k, wall_strength and wall_width must be positive")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.k * (x - self.x0) ** 2 + self.wall_strength * np.exp(-x / self.wall_width)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return self.k * (x - self.x0) - (self.wall_strength / self.wall_width) * np.exp(-x / self.wall_width)

    @property
    def landmarks(self):
        return (self.x0,)

    @property
    def scale(self):
        return 1.0 / math.sqrt(self.k)


PotentialModel = Harmonic | DoubleWell | SoftWallHarmonic

POTENTIALS = {cls.name: cls for cls in (Harmonic, DoubleWell, SoftWallHarmonic)}


def make_potential(name, **params):
    try:
        cls = POTENTIALS[name]
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; choose from {sorted(POTENTIALS)}") from None
    return cls(**{k: float(v) for k, v in params.items()})


class DomainKind(enum.Enum):
    HALF_LINE = "half_line"
    FULL_LINE = "full_line"


@dataclass(frozen=True)
class CoordinateDomain:
    """Subunit extension domain with a finite cutoff for grids and tables.

    Half-line extensions live on ``[0, cutoff]``; full-line ones on
    ``[-cutoff, cutoff]``.
    """

    kind: DomainKind = DomainKind.HALF_LINE
    numerical_cutoff: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DomainKind(self.kind))
        if not self.numerical_cutoff > 0:
            raise ValueError("numerical_cutoff must be positive")

    @property
    def bounds(self):
        """Finite (truncated) extension interval."""
        if self.kind is DomainKind.HALF_LINE:
            return 0.0, float(self.numerical_cutoff)
        return -float(self.numerical_cutoff), float(self.numerical_cutoff)

    @property
    def lower_limit(self):
        return 0.0 if self.kind is DomainKind.HALF_LINE else -math.inf

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind is DomainKind.HALF_LINE:
            return x >= 0.0
        return np.isfinite(x)


def evaluate(phi, x):
    return phi.value(x)


def gradient(phi, x):
    return phi.gradient(x)


def is_confining(phi, kBT, x_max):
    """True when phi at the grid edge sits at least 10 kBT above its rest value."""
    rest = min(float(phi.value(p)) for p in phi.landmarks)
    return float(phi.value(x_max)) > rest + 10.0 * kBT


def _energy_floor(phi, a, b):
    points = [p for p in phi.landmarks if a <= p <= b]
    points += [v for v in (a, b) if math.isfinite(v)]
    return min(float(phi.value(p)) for p in points)


def _quad_boltzmann(phi, kBT, a, b, shift, strict=True):
    """Integral of exp(-(phi - shift)/kBT) over [a, b], split at landmarks."""
    if b <= a:
        return 0.0
    cuts = [a] + sorted(p for p in phi.landmarks if a < p < b) + [b]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            if not strict:
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(
                    lambda x: math.exp(-(float(phi.value(x)) - shift) / kBT),
                    lo, hi, epsabs=0.0, epsrel=1e-12, limit=500,
                )
            except integrate.IntegrationWarning as exc:
                raise NonConvergent(f"quadrature on [{lo}, {hi}] failed: {exc}") from exc
        if strict and err > QUAD_RTOL * max(abs(val), 1e-300) and val > 0:
            raise NonConvergent(f"quadrature error {err:.3g} too large on [{lo}, {hi}]")
        total += val
    return total


def log_subunit_partition(phi, kBT, domain):
    """ln of the single-subunit partition integral over the (untruncated) domain."""
    if not kBT > 0:
        raise ValueError("kBT must be positive")
    a, b = domain.lower_limit, math.inf
    shift = _energy_floor(phi, a, b)
    return math.log(_quad_boltzmann(phi, kBT, a, b, shift)) - shift / kBT


def subunit_partition(phi, kBT, domain):
    return math.exp(log_subunit_partition(phi, kBT, domain))


def tail_mass(phi, kBT, domain):
    """Fraction of the Boltzmann weight lying beyond the numerical cutoff."""
    lo, hi = domain.bounds
    shift = _energy_floor(phi, domain.lower_limit, math.inf)
    z = _quad_boltzmann(phi, kBT, domain.lower_limit, math.inf, shift)
    outside = _quad_boltzmann(phi, kBT, hi, math.inf, shift, strict=False)
    if domain.kind is DomainKind.FULL_LINE:
        outside += _quad_boltzmann(phi, kBT, -math.inf, lo, shift, strict=False)
    return outside / z


def suggest_cutoff(phi, kBT, kind=DomainKind.HALF_LINE, tol=TAIL_MASS_TOL):
    """Smallest cutoff on a coarse ladder with tail mass below ``tol``."""
    kind = DomainKind(kind)
    start = max(abs(p) for p in phi.landmarks) + phi.scale
    cutoff = start
    for _ in range(200):
        if tail_mass(phi, kBT, CoordinateDomain(kind, cutoff)) < tol:
            return cutoff
        cutoff += 0.5 * phi.scale * math.sqrt(kBT)
    raise NonConvergent("no cutoff found with acceptable tail mass")
