"""Desk-scale invariant suite behind the ``validate`` experiment."""
from __future__ import annotations

import itertools
import math
from typing import NamedTuple

import numpy as np
from scipy import stats

from . import dynamics, equilibrium, fluctuation, potential, thermo
from .config import DEFAULT_TOLERANCES
from .equilibrium import ChainModel
from .grid import DensityField, Grid
from .potential import CoordinateDomain, DomainKind


class Check(NamedTuple):
    module: str
    name: str
    passed: bool
    value: float
    limit: float


def _check(module, name, value, limit, ok=None):
    value = float(value)
    return Check(module, name, bool(value <= limit if ok is None else ok), value, float(limit))


def _fd_rel_error(f, g, x, step):
    fd = (f(x + step) - f(x - step)) / (2 * step)
    return np.max(np.abs(fd - g) / np.maximum(np.abs(g), 1.0))


def potential_checks(tol, rng):
    out = []
    variants = [potential.Harmonic(2.0, 0.5), potential.DoubleWell(1.0, 2.0, 0.3), potential.SoftWallHarmonic()]
    for phi in variants:
        x = rng.uniform(0.05, 3.0, 100)
        err = _fd_rel_error(phi.value, phi.gradient(x), x, 1e-5 * phi.scale)
        out.append(_check("potential", f"gradient matches finite difference ({phi.name})", err, tol["gradient"]))
    full = CoordinateDomain(DomainKind.FULL_LINE, 10.0)
    # monotone only for non-negative phi: dz/dkBT carries the sign of <phi>
    ok = True
    half = CoordinateDomain(DomainKind.HALF_LINE, 10.0)
    for phi in (potential.Harmonic(2.0, 0.5), potential.SoftWallHarmonic()):
        zs = [potential.subunit_partition(phi, kT, half) for kT in (0.5, 1.0, 2.0, 4.0)]
        ok = ok and all(np.diff(zs) > 0)
    out.append(_check("potential", "partition increases with kBT (phi >= 0)", 0.0, 0.0, ok=ok))
    z0 = potential.subunit_partition(potential.Harmonic(1.0, 0.0), 1.0, full)
    z1 = potential.subunit_partition(potential.Harmonic(1.0, 1.7), 1.0, full)
    out.append(_check("potential", "partition translation invariant", abs(z1 / z0 - 1), 1e-9))
    return out


def equilibrium_checks(tol, rng):
    out = []
    chain = ChainModel(3, potential.Harmonic(1.0, 1.0), domain=CoordinateDomain(DomainKind.HALF_LINE, 9.0))
    h = 0.05
    worst = 0.0
    for N in (2, 3):
        c, prev = ChainModel(N, chain.phi, domain=chain.domain), ChainModel(N - 1, chain.phi, domain=chain.domain)
        a = equilibrium.end_marginal(c, equilibrium.end_grid(c, h))
        b = equilibrium.convolve(equilibrium.end_marginal(prev, equilibrium.end_grid(prev, h)),
                                 equilibrium.subunit_density(c, equilibrium.subunit_grid(c, h)))
        worst = max(worst, a.l1_distance(b))
    out.append(_check("equilibrium", "end marginal is iterated convolution", worst, tol["convolution"]))

    full = CoordinateDomain(DomainKind.FULL_LINE, 8.0)
    for N in (1, 2):
        c = ChainModel(N, potential.Harmonic(), domain=full)
        g = Grid((-8.0,) * N, (8.0,) * N, (200,) * N)
        z = np.stack(g.mesh(), axis=-1)
        total = np.exp(equilibrium.joint_log_density(c, equilibrium.junctions_of(z))).sum() * g.cell_volume
        out.append(_check("equilibrium", f"joint density integrates to 1 (N={N})", abs(total - 1), 1e-6))

    one = ChainModel(1, chain.phi, domain=chain.domain)
    zs = equilibrium.sample_extensions(one, 100_000, rng)[:, 0]
    lo, hi = chain.domain.bounds
    edges = np.quantile(zs, np.linspace(0, 1, 51))
    edges[0], edges[-1] = lo, hi
    counts, _ = np.histogram(zs, edges)
    dens = equilibrium.subunit_density(one, Grid.uniform(lo, hi, 4096))
    expected = np.diff(dens.cdf(edges)) * zs.size
    pval = stats.chisquare(counts, expected * counts.sum() / expected.sum()).pvalue
    out.append(_check("equilibrium", "sampled extensions match p(x) (chi-squared p-value)",
                      pval, tol["significance"], ok=pval > tol["significance"]))

    c = ChainModel(3, chain.phi, domain=chain.domain)
    xN = equilibrium.sample_chains(c, 100_000, rng)[:, -1]
    g = Grid.uniform(0.0, 15.0, 60)
    F = equilibrium.end_free_energy(c, g, refine=8).values
    counts, _ = np.histogram(xN, g.edges[0])
    keep = counts >= 500
    F_hist = -np.log(counts[keep] / xN.size / g.spacing[0])
    z = np.abs(F_hist - F[keep]) * np.sqrt(counts[keep])
    out.append(_check("equilibrium", "F(x_N) matches sampled histogram (max z-score)", z.max(), 3.0))
    return out


def fluctuation_checks(tol, rng):
    out = []
    worst_neg, worst_convex = 0.0, 0.0
    for _ in range(200):
        p, a, b = rng.dirichlet(np.ones(5), 3)
        worst_neg = min(worst_neg, fluctuation.relative_entropy(a, p))
        for lam in (0.25, 0.5, 0.75):
            mix = fluctuation.relative_entropy(lam * a + (1 - lam) * b, p)
            bound = lam * fluctuation.relative_entropy(a, p) + (1 - lam) * fluctuation.relative_entropy(b, p)
            worst_convex = max(worst_convex, mix - bound)
    out.append(_check("fluctuation", "relative entropy non-negative", -worst_neg, 0.0))
    p = rng.dirichlet(np.ones(5))
    out.append(_check("fluctuation", "relative entropy zero at nu = p",
                      abs(fluctuation.relative_entropy(p, p)), 1e-15))
    out.append(_check("fluctuation", "relative entropy convex", worst_convex, 1e-12))

    worst = 0.0
    for N, m in itertools.product(range(1, 7), range(1, 5)):
        p = rng.dirichlet(np.ones(m))
        p = p / p.sum()
        bins = fluctuation.BinGrid.uniform(0.0, float(m), m)
        total = 0.0
        for counts in _compositions(N, m):
            total += math.exp(fluctuation.multinomial_log_prob(
                fluctuation.EmpiricalMeasure.from_counts(bins, counts), p))
        worst = max(worst, abs(total - 1))
    out.append(_check("fluctuation", "multinomial sums to 1 (N<=6, m<=4)", worst, 1e-12))

    excess = max(fluctuation.gibbs_entropy(q) - math.log(q.size) for q in rng.dirichlet(np.ones(6), 100))
    uniform_gap = abs(fluctuation.gibbs_entropy(np.full(6, 1 / 6)) - math.log(6))
    out.append(_check("fluctuation", "Gibbs entropy <= ln m, equality at uniform",
                      max(excess, uniform_gap), 1e-12, ok=excess <= 1e-12 and uniform_gap < 1e-12))

    p = np.array([0.1, 0.2, 0.3, 0.4])
    nu = np.array([0.25, 0.25, 0.25, 0.25])
    rows = fluctuation.sanov_sweep(nu, p, [100, 1000, 10000], 1.0)
    per = [abs(r[3]) / r[0] for r in rows]
    out.append(_check("fluctuation", "|gap|/N decreases with N", per[-1], per[0],
                      ok=all(np.diff(per) < 0)))
    return out


def _compositions(N, m):
    for cut in itertools.combinations(range(N + m - 1), m - 1):
        bounds = (-1,) + cut + (N + m - 1,)
        yield np.array([bounds[i + 1] - bounds[i] - 1 for i in range(m)])


def _desk_chain(chain):
    return ChainModel(1, chain.phi, chain.kBT, chain.eta, chain.domain)


def _desk_initial(chain, grid):
    lo, hi = chain.domain.bounds
    centre = max(chain.phi.landmarks) + 0.5 * chain.phi.scale
    centre = min(max(centre, lo + 2 * chain.phi.scale), hi - 2 * chain.phi.scale)
    return dynamics.gaussian_density(grid, centre, 0.5 * chain.phi.scale)


def dynamics_checks(tol, rng, chain, cells, dt):
    out = []
    lo, hi = chain.domain.bounds
    grid = Grid.uniform(lo, hi, cells)
    cfg = dynamics.FPSolverConfig.for_chain(chain, grid, dt)
    P = _desk_initial(chain, grid)
    mass_err, min_val = 0.0, np.inf
    solver = dynamics.get_solver(chain, grid)
    vals = P.values
    for _ in range(200):
        new = solver.step_values(vals, cfg.dt)
        mass_err = max(mass_err, abs(new.sum() - vals.sum()) * grid.cell_volume)
        min_val = min(min_val, new.min())
        vals = new
    out.append(_check("dynamics", "mass conserved per step", mass_err, tol["mass"]))
    out.append(_check("dynamics", "density stays non-negative", -min_val, 0.0))

    peq = equilibrium.boltzmann_density(chain, grid)
    res = dynamics.relax(peq, chain, cfg, cfg.dt * 10_000)
    out.append(_check("dynamics", "Boltzmann stationary over 1e4 steps (L1)",
                      res.final.l1_distance(peq), tol["stationarity"]))
    j_eq = np.abs(thermo.flux_field(peq, chain)).max()
    j_tr = np.abs(thermo.flux_field(P, chain)).max()
    out.append(_check("dynamics", "zero flux at Boltzmann (relative to transient)", j_eq / j_tr, 1e-8))

    c3 = ChainModel(3, chain.phi, chain.kBT, chain.eta, chain.domain)
    step = 1e-5 * chain.phi.scale
    x = equilibrium.junctions_of(equilibrium.sample_extensions(c3, 100, rng) + 1e3 * step)
    worst = 0.0
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        fd = -(dynamics.chain_potential(c3, x + e) - dynamics.chain_potential(c3, x - e)) / (2 * step)
        f = dynamics.chain_force(c3, x)[:, k]
        worst = max(worst, np.max(np.abs(fd - f) / np.maximum(np.abs(f), 1.0)))
    out.append(_check("dynamics", "chain force is -grad U", worst, tol["gradient"]))
    return out


def thermo_checks(tol, rng, chain, cells, dt):
    out = []
    lo, hi = chain.domain.bounds
    grid = Grid.uniform(lo, hi, cells)
    cfg = dynamics.FPSolverConfig.for_chain(chain, grid, dt)
    res = dynamics.relax(_desk_initial(chain, grid), chain, cfg, cfg.dt * 2000,
                         lambda t, P: (thermo.psi_functional(P, chain), thermo.psi_decomposition(P, chain).rel))
    psi = np.array([r[0] for r in res.records])
    rel = np.array([r[1] for r in res.records])
    rise = np.max(np.diff(psi) / np.abs(psi[:-1]))
    out.append(_check("thermo", "Psi non-increasing (H-theorem)", rise, tol["h_theorem"]))
    out.append(_check("thermo", "relative entropy non-increasing",
                      np.max(np.diff(rel)) / rel[0], tol["h_theorem"]))

    c2 = ChainModel(2, chain.phi, chain.kBT, chain.eta, chain.domain)
    grids = [(chain, grid), (c2, Grid((lo, lo), (hi, hi), (48, 48)))]
    worst_dec, worst_j, worst_diss = 0.0, 0.0, -np.inf
    for c, g in grids:
        peq = equilibrium.boltzmann_density(c, g).values
        for _ in range(10):
            P = DensityField.normalized(g, peq * np.exp(0.5 * rng.standard_normal(g.shape)))
            psi_eq, r = thermo.psi_decomposition(P, c)
            psi_val = thermo.psi_functional(P, c)
            worst_dec = max(worst_dec, abs(psi_val - (psi_eq + c.kBT * r)) / abs(psi_val))
            J, Phi = thermo.flux_field(P, c), thermo.force_field(P, c)
            worst_j = max(worst_j, np.abs(J - P.values * Phi / c.eta).max() / np.abs(J).max())
            worst_diss = max(worst_diss, thermo.dissipation_rate(P, c))
    out.append(_check("thermo", "Psi = Psi_eq + kBT H decomposition", worst_dec, tol["decomposition"]))
    out.append(_check("thermo", "J = P Phi / eta", worst_j, tol["flux_identity"]))
    out.append(_check("thermo", "dissipation rate <= 0", worst_diss, 0.0, ok=worst_diss < 0))
    return out


def run_suite(chain, cells=256, dt=None, tolerances=None, seed=0):
    """Run every invariant check; ``chain`` supplies the potential for the dynamics checks."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    rng = np.random.default_rng(seed)
    desk = _desk_chain(chain)
    checks = []
    checks += potential_checks(tol, rng)
    checks += equilibrium_checks(tol, rng)
    checks += fluctuation_checks(tol, rng)
    checks += dynamics_checks(tol, rng, desk, cells, dt)
    checks += thermo_checks(tol, rng, desk, cells, dt)
    return checks
