"""Overdamped relaxation of the chain: Langevin ensembles and a grid solver.

Langevin walkers integrate ``dx = -grad U / eta dt + sqrt(2 kBT / eta) dW``
in junction coordinates with Euler-Maruyama. The Fokker-Planck solver works
in extension coordinates, where U separates. For N = 2 the change of
variables ``z1 = x1, z2 = x2 - x1`` has Jacobian ``A = [[1, 0], [-1, 1]]``,
so the generator becomes ``div(M (kBT grad P + P grad U))`` with the
constant mobility ``M = A A^T / eta = [[1, -1], [-1, 2]] / eta``. M splits
into two lattice directions, ``(0, 1)`` (moving x2 alone) and ``(1, -1)``
(moving x1 alone), each weighted ``1 / eta``; the solver applies a 1-D
exponential-fitting flux along each. Every explicit step is then a
stochastic matrix with the cell-averaged Boltzmann density as its exact
reversible fixed point.
"""
from __future__ import annotations

import enum
import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import exprel, ndtr

from .equilibrium import (
    ChainState,
    cell_potential,
    check_extensions,
    extensions_of,
    junctions_of,
    sample_extensions,
)
from .errors import NegativeDensity, StabilityViolation
from .grid import DensityField, Grid
from .potential import DomainKind

BLOCK_SIZE = 8192
CFL_FACTOR = 0.4
NEGATIVE_TOL = 1e-14

# (lattice shift, mobility weight in units of 1/eta) per extension-space dimension
DIRECTIONS = {
    1: (((1,), 1.0),),
    2: (((0, 1), 1.0), ((1, -1), 1.0)),
}


def chain_potential(chain, state):
    """U = sum of phi over extensions; broadcasts over leading axes."""
    x = getattr(state, "junctions", state)
    z = extensions_of(x)
    check_extensions(chain, z)
    u = np.sum(chain.phi.value(z), axis=-1)
    return float(u) if np.ndim(u) == 0 else u


def chain_force(chain, state):
    """-grad U in junction coordinates."""
    x = getattr(state, "junctions", state)
    g = chain.phi.gradient(extensions_of(x))
    force = -g
    force[..., :-1] += g[..., 1:]
    return force


# Langevin ensembles

@dataclass(frozen=True, eq=False)
class Ensemble:
    """Walker positions of shape ``(walkers, N)`` with their noise streams.

    Walkers are split into fixed blocks of ``BLOCK_SIZE``; block ``b`` draws
    from ``SeedSequence(seed, spawn_key=(b,))``. Streams advance in place,
    so an Ensemble should be stepped only once.
    """

    positions: np.ndarray
    seed: int
    time: float = 0.0
    streams: tuple = field(default=(), repr=False)

    def __post_init__(self):
        x = np.array(self.positions, dtype=float)
        if x.ndim != 2:
            raise ValueError("positions must have shape (walkers, N)")
        x.setflags(write=False)
        object.__setattr__(self, "positions", x)
        if not self.streams:
            object.__setattr__(self, "streams", make_streams(self.seed, x.shape[0]))

    @property
    def walkers(self):
        return self.positions.shape[0]

    @property
    def extensions(self):
        return extensions_of(self.positions)

    def states(self):
        return [ChainState(x, self.time) for x in self.positions]

    @classmethod
    def equilibrium(cls, chain, walkers, seed):
        """Exact Boltzmann samples drawn block by block from the ensemble streams."""
        streams = make_streams(seed, walkers)
        parts = [sample_extensions(chain, n, rng) for n, rng in zip(_block_sizes(walkers), streams)]
        return cls(junctions_of(np.concatenate(parts)), seed, 0.0, streams)

    @classmethod
    def gaussian(cls, chain, walkers, seed, mean, std):
        """Independent Gaussian extensions (per-extension mean and std), folded onto
        the half line when the domain requires it."""
        streams = make_streams(seed, walkers)
        mean = np.broadcast_to(np.asarray(mean, dtype=float), (chain.N,))
        std = np.broadcast_to(np.asarray(std, dtype=float), (chain.N,))
        parts = [mean + std * rng.standard_normal((n, chain.N))
                 for n, rng in zip(_block_sizes(walkers), streams)]
        z = np.concatenate(parts)
        if chain.domain.kind is DomainKind.HALF_LINE:
            z = np.abs(z)
        return cls(junctions_of(z), seed, 0.0, streams)


def _block_sizes(walkers):
    full, rest = divmod(walkers, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def make_streams(seed, walkers):
    ss = np.random.SeedSequence(int(seed))
    return tuple(np.random.default_rng(np.random.SeedSequence(ss.entropy, spawn_key=(b,)))
                 for b in range(len(_block_sizes(walkers))))


def _em_block(x, chain, dt, rng):
    noise = rng.standard_normal(x.shape)
    x = x + chain_force(chain, x) * (dt / chain.eta) + math.sqrt(2.0 * chain.kBT * dt / chain.eta) * noise
    if chain.domain.kind is DomainKind.HALF_LINE:
        x = junctions_of(np.abs(extensions_of(x)))
    return x


def langevin_step(ensemble, chain, dt, workers=1):
    """One Euler-Maruyama step for every walker.

    On the half line, extensions pushed below zero are reflected before the
    junctions are rebuilt. Output does not depend on ``workers``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if ensemble.positions.shape[1] != chain.N:
        raise ValueError("ensemble does not match chain length")
    bounds = np.cumsum([0] + _block_sizes(ensemble.walkers))
    blocks = [ensemble.positions[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
    jobs = list(zip(blocks, ensemble.streams))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(lambda job: _em_block(job[0], chain, dt, job[1]), jobs))
    else:
        out = [_em_block(x, chain, dt, rng) for x, rng in jobs]
    new = np.concatenate(out) if out else ensemble.positions.copy()
    return Ensemble(new, ensemble.seed, ensemble.time + dt, ensemble.streams)


# Fokker-Planck grid solver

class Scheme(enum.Enum):
    EXPONENTIAL_FITTING = "exponential_fitting"
    CENTRAL_UPWIND = "central_upwind"


@dataclass(frozen=True)
class FPSolverConfig:
    """Time step, extension-space grid, and flux scheme for ``fp_step``."""

    dt: float
    grid: Grid
    scheme: Scheme = Scheme.EXPONENTIAL_FITTING

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.grid.dim == 2 and not math.isclose(*self.grid.spacing, rel_tol=1e-12):
            raise ValueError("2-D solver grids need equal spacing on both axes")

    @classmethod
    def for_chain(cls, chain, grid, dt=None, scheme=Scheme.EXPONENTIAL_FITTING, safety=0.9):
        """Config validated against ``chain``; ``dt=None`` picks ``safety`` times the bound."""
        bound = stability_bound(chain, grid, scheme)
        cfg = cls(safety * bound if dt is None else dt, grid, scheme)
        if cfg.dt > bound:
            raise StabilityViolation(cfg.dt, bound)
        return cfg


def _bernoulli(x):
    """x / (exp(x) - 1), finite at x = 0."""
    return 1.0 / exprel(x)


def _bonds(shape, shift):
    """Slices pairing each cell ``a`` with its neighbour ``a + shift``."""
    src, dst = [], []
    for n, s in zip(shape, shift):
        if s >= 0:
            src.append(slice(0, n - s))
            dst.append(slice(s, n))
        else:
            src.append(slice(-s, n))
            dst.append(slice(0, n + s))
    return tuple(src), tuple(dst)


class FPSolver:
    """Explicit finite-volume stepper for one chain on one grid.

    Each bond ``a -> b`` along a lattice direction with weight ``w`` carries
    rates ``w D / h^2 * B(+-dU / kBT)`` with the Bernoulli function B
    (exponential fitting, exact for piecewise-linear U), or a centered
    diffusion plus upwinded drift for ``Scheme.CENTRAL_UPWIND``. Bonds
    leaving the grid are absent, which is the zero-flux boundary.
    """

    def __init__(self, chain, grid, scheme=Scheme.EXPONENTIAL_FITTING):
        if chain.N not in DIRECTIONS or grid.dim != chain.N:
            raise ValueError("grid solver supports N = 1 (1-D grid) or N = 2 (2-D grid) only")
        self.chain = chain
        self.grid = grid
        self.scheme = Scheme(scheme)
        self.potential = cell_potential(chain, grid)
        h = min(grid.spacing)
        D = chain.diffusivity
        self.bonds = []
        self.out_rate = np.zeros(grid.shape)
        for shift, weight in DIRECTIONS[chain.N]:
            a, b = _bonds(grid.shape, shift)
            du = self.potential[b] - self.potential[a]
            base = weight * D / h**2
            if self.scheme is Scheme.EXPONENTIAL_FITTING:
                fwd = base * _bernoulli(du / chain.kBT)
                bwd = base * _bernoulli(-du / chain.kBT)
            else:
                v = -weight * du / (h * chain.eta)
                fwd = base + np.maximum(v, 0.0) / h
                bwd = base + np.maximum(-v, 0.0) / h
            self.bonds.append((a, b, fwd, bwd))
            self.out_rate[a] += fwd
            self.out_rate[b] += bwd
        cfl = CFL_FACTOR * chain.eta * h**2 / chain.kBT
        self.dt_max = min(cfl, 1.0 / float(self.out_rate.max()))

    def check(self, dt):
        if dt > self.dt_max * (1 + 1e-12):
            raise StabilityViolation(dt, self.dt_max)

    def bond_fluxes(self, values):
        """Net rate of probability per cell volume moving along each bond."""
        return [fwd * values[a] - bwd * values[b] for a, b, fwd, bwd in self.bonds]

    def rate_of_change(self, values):
        """Semi-discrete dP/dt."""
        out = np.zeros(self.grid.shape)
        for (a, b, _, _), f in zip(self.bonds, self.bond_fluxes(values)):
            out[a] -= f
            out[b] += f
        return out

    def step_values(self, values, dt):
        """Advance raw cell values; gain/loss form keeps every entry non-negative."""
        new = values * (1.0 - dt * self.out_rate)
        for a, b, fwd, bwd in self.bonds:
            new[b] += dt * fwd * values[a]
            new[a] += dt * bwd * values[b]
        return new


@functools.lru_cache(maxsize=16)
def get_solver(chain, grid, scheme=Scheme.EXPONENTIAL_FITTING):
    return FPSolver(chain, grid, Scheme(scheme))


def stability_bound(chain, grid, scheme=Scheme.EXPONENTIAL_FITTING):
    """Largest admissible dt: the CFL-like bound ``0.4 eta h^2 / kBT``, tightened
    where needed so that no cell loses more than its content in one step."""
    return get_solver(chain, grid, scheme).dt_max


def fp_step(P, chain, cfg, dt=None):
    """Advance a cell-averaged density by one explicit step (``cfg.dt`` by default)."""
    dt = cfg.dt if dt is None else dt
    if P.grid != cfg.grid:
        raise ValueError("density grid differs from solver grid")
    solver = get_solver(chain, cfg.grid, cfg.scheme)
    solver.check(dt)
    new = solver.step_values(P.values, dt)
    if np.any(new < -NEGATIVE_TOL):
        raise NegativeDensity(f"min density {new.min():.3g} after step")
    return DensityField(cfg.grid, np.clip(new, 0.0, None))


def gaussian_density(grid, mean, std):
    """Cell averages of a product Gaussian (one mean/std per axis)."""
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (grid.dim,))
    std = np.broadcast_to(np.asarray(std, dtype=float), (grid.dim,))
    factors = []
    for e, m, s in zip(grid.edges, mean, std):
        u = (e - m) / s
        lower = np.diff(ndtr(u))
        upper = -np.diff(ndtr(-u))
        mid = 0.5 * (u[1:] + u[:-1])
        factors.append(np.where(mid < 0, lower, upper))
    masses = factors[0] if grid.dim == 1 else np.outer(factors[0], factors[1])
    return DensityField.normalized(grid, masses)


# Time stepping driver

@dataclass(frozen=True)
class LangevinConfig:
    dt: float
    workers: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")


class RelaxResult(NamedTuple):
    final: object
    times: list
    records: list


def relax(initial, chain, cfg, t_final, observer: Callable | None = None, every=1):
    """Advance a density (FPSolverConfig) or ensemble (LangevinConfig) to ``t_final``.

    ``observer(t, state)`` runs at the start, every ``every`` steps, and at the
    end; its return values form ``records``. The last step is shortened to
    land on ``t_final`` exactly.
    """
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    if isinstance(initial, DensityField):
        if not isinstance(cfg, FPSolverConfig):
            raise TypeError("density relaxation needs an FPSolverConfig")
        solver = get_solver(chain, cfg.grid, cfg.scheme)
        solver.check(cfg.dt)
        grid = cfg.grid

        def advance(state, t, dt):
            new = solver.step_values(state.values, dt)
            if np.any(new < -NEGATIVE_TOL):
                raise NegativeDensity(f"min density {new.min():.3g} at t={t + dt:.6g}")
            return DensityField(grid, np.clip(new, 0.0, None))
    elif isinstance(initial, Ensemble):
        if not isinstance(cfg, LangevinConfig):
            raise TypeError("ensemble relaxation needs a LangevinConfig")

        def advance(state, t, dt):
            return langevin_step(state, chain, dt, workers=cfg.workers)
    else:
        raise TypeError(f"cannot relax a {type(initial).__name__}")

    n_steps = int(math.ceil(t_final / cfg.dt - 1e-9)) if t_final > 0 else 0
    times, records = [], []

    def observe(t, state):
        times.append(t)
        if observer is not None:
            records.append(observer(t, state))

    state, t = initial, 0.0
    observe(t, state)
    for i in range(1, n_steps + 1):
        dt = cfg.dt if i < n_steps else t_final - (n_steps - 1) * cfg.dt
        state = advance(state, t, dt)
        t = t_final if i == n_steps else i * cfg.dt
        if i % every == 0 or i == n_steps:
            observe(t, state)
    return RelaxResult(state, times, records)
