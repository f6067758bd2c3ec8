"""Free-energy functional, fluxes, forces and dissipation of a density.

All functionals are evaluated on the same cells as the grid solver and use
its cell potential, so that the discrete H-theorem and the decomposition
``Psi = -kBT ln Z + kBT H[P | P_eq]`` hold to rounding. Vector fields are
returned with components along the junction coordinates ``x_k`` (for a 2-D
extension grid: ``d/dx1 = d/dz1 - d/dz2`` and ``d/dx2 = d/dz2``), with
gradients taken by central differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .equilibrium import cell_potential, log_grid_partition
from .errors import AbsoluteContinuityViolation, ZeroDensityInterior
from .grid import Grid, histogram_density

TINY = 1e-300


def _plogp(values):
    return np.where(values > 0, values * np.log(np.where(values > 0, values, 1.0)), 0.0)


def psi_functional(P, chain):
    """Sum over cells of ``(U P + kBT P ln P) * cell volume``."""
    U = cell_potential(chain, P.grid)
    return float(np.sum(U * P.values + chain.kBT * _plogp(P.values)) * P.grid.cell_volume)


class PsiDecomposition(NamedTuple):
    psi_eq: float
    rel: float


def psi_decomposition(P, chain):
    """Equilibrium free energy of the grid and relative entropy to its Boltzmann density."""
    log_z = log_grid_partition(chain, P.grid)
    log_peq = -cell_potential(chain, P.grid) / chain.kBT - log_z
    support = P.values > 0
    if np.any(support & (np.exp(log_peq) == 0)):
        raise AbsoluteContinuityViolation("P has mass where the Boltzmann density underflows")
    rel = np.sum(P.values[support] * (np.log(P.values[support]) - log_peq[support]))
    return PsiDecomposition(-chain.kBT * log_z, float(rel * P.grid.cell_volume))


def _interior(shape):
    return tuple(slice(1, n - 1) if n > 2 else slice(None) for n in shape)


def _log_density(P):
    if np.any(P.values[_interior(P.grid.shape)] <= 0):
        raise ZeroDensityInterior("density vanishes on interior cells")
    return np.log(np.maximum(P.values, TINY))


def _grad_z(f, grid):
    if grid.dim == 1:
        return [np.gradient(f, grid.spacing[0])]
    return np.gradient(f, *grid.spacing)


def _to_junction(grads):
    if len(grads) == 1:
        return np.asarray(grads)
    gz1, gz2 = grads
    return np.stack([gz1 - gz2, gz2])


def _divergence(field, grid):
    if grid.dim == 1:
        return np.gradient(field[0], grid.spacing[0])
    h1, h2 = grid.spacing
    j1, j2 = field
    return np.gradient(j1, h1, axis=0) - np.gradient(j1, h2, axis=1) + np.gradient(j2, h2, axis=1)


def force_field(P, chain):
    """Phi = -kBT grad ln P - grad U; shape ``(N, *grid.shape)``."""
    mu = chain.kBT * _log_density(P) + cell_potential(chain, P.grid)
    return -_to_junction(_grad_z(mu, P.grid))


def flux_field(P, chain):
    """J = -(kBT/eta) grad P - (1/eta) grad U P.

    grad P is taken as ``P grad ln P`` so that ``J = P Phi / eta`` holds on
    the grid exactly.
    """
    log_p = _log_density(P)
    grad_log_p = _to_junction(_grad_z(log_p, P.grid))
    grad_u = _to_junction(_grad_z(cell_potential(chain, P.grid), P.grid))
    return -(chain.kBT / chain.eta) * P.values * grad_log_p - grad_u * P.values / chain.eta


def _j_dot_phi(P, chain):
    return float(np.sum(flux_field(P, chain) * force_field(P, chain)) * P.grid.cell_volume)


def dissipation_rate(P, chain):
    """dPsi/dt = -sum J . Phi dV; never positive."""
    return -_j_dot_phi(P, chain)


def entropy_production_rate(P, chain):
    """sum J . Phi dV / T, in units where kB = 1."""
    return _j_dot_phi(P, chain) / chain.kBT


class DescentDiagnostic(NamedTuple):
    cos_angle: float


def descent_diagnostic(P, chain):
    """Alignment of dP/dt = -div J with the L2 steepest-descent direction of Psi.

    The steepest-descent direction is ``-(U + kBT (1 + ln P))`` projected onto
    zero-mean perturbations.
    """
    dpdt = -_divergence(flux_field(P, chain), P.grid)
    mu = cell_potential(chain, P.grid) + chain.kBT * (1.0 + _log_density(P))
    g = -(mu - mu.mean())
    norm = np.linalg.norm(dpdt) * np.linalg.norm(g)
    if norm == 0:
        return DescentDiagnostic(1.0)
    return DescentDiagnostic(float(np.sum(dpdt * g) / norm))


@dataclass(frozen=True)
class ThermoReport:
    t: float
    psi: float
    psi_eq: float
    rel_entropy: float
    dissipation: float
    ep_rate: float
    cos_angle: float

    FIELDS = ("t", "psi", "psi_eq", "rel_entropy", "dissipation", "ep_rate", "cos_angle")

    def row(self):
        return tuple(getattr(self, f) for f in self.FIELDS)


def thermo_report(P, chain, t=0.0):
    psi_eq, rel = psi_decomposition(P, chain)
    jphi = _j_dot_phi(P, chain)
    return ThermoReport(
        t=float(t),
        psi=psi_functional(P, chain),
        psi_eq=psi_eq,
        rel_entropy=rel,
        dissipation=-jphi,
        ep_rate=jphi / chain.kBT,
        cos_angle=descent_diagnostic(P, chain).cos_angle,
    )


class EnsemblePsi(NamedTuple):
    psi: float
    stderr: float
    rel_entropy: float


def ensemble_grid(chain, walkers):
    """Histogram grid for ensemble estimates: ``2 * ceil(walkers ** (1/3))`` bins per axis."""
    bins = 2 * math.ceil(walkers ** (1.0 / 3.0) - 1e-9)
    lo, hi = chain.domain.bounds
    return Grid((lo,) * chain.N, (hi,) * chain.N, (bins,) * chain.N)


def ensemble_psi(ensemble, chain, resamples=50):
    """Plug-in histogram estimate of Psi for an N = 1 or N = 2 ensemble.

    The standard error comes from ``resamples`` bootstrap replicates drawn
    with a generator seeded from the ensemble seed.
    """
    if chain.N > 2:
        raise ValueError("histogram estimate of Psi is limited to N <= 2")
    z = ensemble.extensions
    grid = ensemble_grid(chain, z.shape[0])
    P = histogram_density(z if chain.N == 2 else z[:, 0], grid)
    psi = psi_functional(P, chain)
    rel = psi_decomposition(P, chain).rel
    rng = np.random.default_rng(np.random.SeedSequence(int(ensemble.seed), spawn_key=(2**20,)))
    boot = []
    for _ in range(resamples):
        pick = z[rng.integers(0, z.shape[0], z.shape[0])]
        boot.append(psi_functional(histogram_density(pick if chain.N == 2 else pick[:, 0], grid), chain))
    return EnsemblePsi(psi, float(np.std(boot, ddof=1)), rel)
