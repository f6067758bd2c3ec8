"""Experiment drivers behind the command line.

Each ``run_*`` takes a validated ExperimentConfig, writes CSV artifacts into
``cfg.output_dir`` and returns a summary dict. Every file starts with a
header line carrying the config hash and seed.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import stats

from . import dynamics, equilibrium, fluctuation, thermo, validation
from .dynamics import Ensemble, FPSolverConfig, LangevinConfig
from .errors import ConfigError, NonIntegerCounts, StabilityViolation
from .grid import Grid, histogram_density
from .io import chain_rows, density_columns, density_rows, write_csv, write_density

KS_CRITICAL_1PCT = 1.63
DEFAULT_LANGEVIN_DT = 1e-3


def _out(cfg, name):
    return cfg.output_dir / name


def _write_summary(cfg, summary):
    write_csv(_out(cfg, "summary.csv"), ["quantity", "value"], list(summary.items()),
              cfg.meta(experiment=cfg.experiment))
    return summary


def run_equilibrium(cfg):
    chain = cfg.chain
    lo, hi = chain.domain.bounds
    h = (hi - lo) / cfg.cells
    sub = equilibrium.subunit_density(chain, equilibrium.subunit_grid(chain, h))
    gend = equilibrium.end_grid(chain, h)
    em = equilibrium.end_marginal(chain, gend)
    F = equilibrium.end_free_energy(chain, gend)
    meta = cfg.meta()
    write_density(_out(cfg, "subunit_density.csv"), sub, meta)
    write_density(_out(cfg, "end_marginal.csv"), em, meta)
    write_csv(_out(cfg, "end_free_energy.csv"), ["x", "free_energy"],
              zip(gend.centers[0], F.values), meta)

    x = Ensemble.equilibrium(chain, cfg.walkers, cfg.seed).positions
    xN = x[:, -1]
    write_csv(_out(cfg, "chains.csv"), ["sample_id", "k", "x_k"], chain_rows(x[: cfg.dump_chains]), meta)
    sampled = histogram_density(xN, gend)
    write_csv(_out(cfg, "end_comparison.csv"), ["x", "sampled", "analytic"],
              zip(gend.centers[0], sampled.values, em.values), meta)

    ks = stats.kstest(xN, em.cdf)
    critical = KS_CRITICAL_1PCT / math.sqrt(xN.size)
    return _write_summary(cfg, {
        "ln_Z": equilibrium.partition_function(chain),
        "end_mean": em.mean(),
        "end_variance": em.variance(),
        "sampled_mean": float(xN.mean()),
        "sampled_variance": float(xN.var()),
        "ks_statistic": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
        "ks_critical_1pct": critical,
        "ks_pass": bool(ks.statistic < critical),
    })


def sweep_measure(cfg, p):
    """Measure used for the Sanov sweep: configured, or (p + uniform) / 2 rounded
    to the composition of the smallest sample size."""
    if cfg.sweep_nu is not None:
        nu = np.asarray(cfg.sweep_nu, dtype=float)
        if nu.size != p.size:
            raise ConfigError("numerics.sweep_nu", f"needs {p.size} entries")
        return nu / nu.sum()
    n0 = min(cfg.n_list)
    return fluctuation.nearest_composition(0.5 * (p + 1.0 / p.size), n0) / n0


def run_fluctuation(cfg):
    chain = cfg.chain
    lo, hi = chain.domain.bounds
    bins = fluctuation.BinGrid.uniform(lo, hi, cfg.bins)
    fine = Grid.uniform(lo, hi, max(cfg.cells, 64 * cfg.bins))
    p = fluctuation.bin_probabilities(equilibrium.subunit_density(chain, fine), bins)
    meta = cfg.meta()

    z = Ensemble.equilibrium(chain, cfg.repeats, cfg.seed).extensions
    counts = fluctuation.extension_counts(z, bins)
    rows = []
    for i, c in enumerate(counts):
        mu = fluctuation.EmpiricalMeasure.from_counts(bins, c)
        rows.append((i, fluctuation.relative_entropy(mu.nu, p), fluctuation.fluctuation_free_energy(mu, p, chain.kBT)))
    write_csv(_out(cfg, "fluctuation_samples.csv"), ["sample_id", "rel_entropy", "delta_F"], rows, meta)
    first = counts[0] / counts[0].sum()
    write_csv(_out(cfg, "empirical_measure.csv"), ["bin_lo", "bin_hi", "nu"],
              zip(bins.edges[:-1], bins.edges[1:], first), meta)

    nu = sweep_measure(cfg, p)
    try:
        sweep = fluctuation.sanov_sweep(nu, p, sorted(cfg.n_list), chain.kBT, bins)
    except NonIntegerCounts as exc:
        raise ConfigError("numerics.n_list", f"N * nu must be integral for every N ({exc})") from None
    write_csv(_out(cfg, "sanov.csv"), ["N", "exact", "stirling", "gap"], sweep, meta)

    per = [abs(r[3]) / r[0] for r in sweep]
    mean_h = float(np.mean([r[1] for r in rows]))
    reference = (cfg.bins - 1) / (2.0 * chain.N)
    return _write_summary(cfg, {
        "mean_rel_entropy": mean_h,
        "chi2_reference": reference,
        "ratio_to_reference": mean_h / reference,
        "mean_delta_F": float(np.mean([r[2] for r in rows])),
        "gap_per_N_decreasing": bool(all(np.diff(per) < 0)),
    })


def relax_grid(cfg):
    lo, hi = cfg.chain.domain.bounds
    if cfg.chain.N == 1:
        return Grid.uniform(lo, hi, cfg.cells)
    return Grid.square(lo, hi, cfg.cells)


def fp_config(cfg):
    """Solver config for the relax experiment; a bad dt is a configuration error."""
    if cfg.chain.N > 2:
        raise ConfigError("chain.N", "the fp engine supports N <= 2; use engine = langevin")
    try:
        return FPSolverConfig.for_chain(cfg.chain, relax_grid(cfg), cfg.dt)
    except StabilityViolation as exc:
        raise ConfigError("numerics.dt", str(exc)) from None


def _snapshot_steps(n_steps, count):
    return set(np.unique(np.rint(np.linspace(0, n_steps, count)).astype(int)).tolist())


def _end_moments(P):
    if P.dim == 1:
        return P.mean(), P.variance()
    X, Y = P.grid.mesh()
    end = X + Y
    m = float(np.sum(end * P.masses))
    return m, float(np.sum((end - m) ** 2 * P.masses))


def run_relax(cfg):
    if cfg.engine == "fp":
        return _relax_fp(cfg)
    return _relax_langevin(cfg)


def _relax_fp(cfg):
    chain = cfg.chain
    scfg = fp_config(cfg)
    grid = scfg.grid
    if cfg.initial == "boltzmann":
        P0 = equilibrium.boltzmann_density(chain, grid)
    else:
        P0 = dynamics.gaussian_density(grid, cfg.initial_mean, cfg.initial_std)
    n_steps = int(math.ceil(cfg.t_final / scfg.dt - 1e-9))
    snaps = _snapshot_steps(n_steps, cfg.snapshots)
    psi, reports, snapshots, observables = [], [], [], []

    def observer(t, P):
        i = int(round(t / scfg.dt))
        psi.append(thermo.psi_functional(P, chain))
        if i % cfg.observe_every == 0 or i == n_steps:
            rep = thermo.thermo_report(P, chain, t)
            reports.append(rep.row())
            m, v = _end_moments(P)
            observables.extend([(t, "psi", rep.psi), (t, "rel_entropy", rep.rel_entropy),
                                (t, "mean_end", m), (t, "var_end", v)])
        if i in snaps:
            snapshots.extend(density_rows(P, t))

    res = dynamics.relax(P0, chain, scfg, cfg.t_final, observer)
    psi = np.array(psi)
    rise = float(np.max(np.diff(psi) / np.abs(psi[:-1]))) if psi.size > 1 else 0.0
    verdict = "PASS" if rise <= cfg.tolerances["h_theorem"] else "FAIL"
    _write_relax_outputs(cfg, reports, observables, snapshots, grid.dim)
    final = thermo.psi_decomposition(res.final, chain)
    return _write_summary(cfg, {
        "engine": "fp",
        "dt": scfg.dt,
        "steps": n_steps,
        "psi_initial": float(psi[0]),
        "psi_final": float(psi[-1]),
        "psi_eq": final.psi_eq,
        "rel_entropy_final": final.rel,
        "max_relative_rise": rise,
        "verdict": verdict,
    })


def _relax_langevin(cfg):
    chain = cfg.chain
    dt = cfg.dt or DEFAULT_LANGEVIN_DT
    if cfg.initial == "boltzmann":
        E0 = Ensemble.equilibrium(chain, cfg.walkers, cfg.seed)
    else:
        E0 = Ensemble.gaussian(chain, cfg.walkers, cfg.seed, cfg.initial_mean, cfg.initial_std)
    n_steps = int(math.ceil(cfg.t_final / dt - 1e-9))
    snaps = _snapshot_steps(n_steps, cfg.snapshots)
    estimates, reports, snapshots, observables = [], [], [], []
    hist_grid = thermo.ensemble_grid(chain, cfg.walkers) if chain.N <= 2 else None

    def observer(t, E):
        i = int(round(t / dt))
        end = E.positions[:, -1]
        U = dynamics.chain_potential(chain, E.positions)
        observables.extend([(t, "mean_end", float(end.mean())), (t, "var_end", float(end.var())),
                            (t, "mean_U", float(U.mean()))])
        if hist_grid is not None:
            est = thermo.ensemble_psi(E, chain)
            psi_eq = -chain.kBT * equilibrium.log_grid_partition(chain, hist_grid)
            estimates.append(est)
            reports.append((t, est.psi, psi_eq, est.rel_entropy, math.nan, math.nan, math.nan))
            observables.extend([(t, "psi", est.psi), (t, "psi_stderr", est.stderr)])
            if i in snaps:
                z = E.extensions
                snapshots.extend(density_rows(histogram_density(z if chain.N == 2 else z[:, 0], hist_grid), t))

    res = dynamics.relax(E0, chain, LangevinConfig(dt, cfg.workers), cfg.t_final, observer,
                         every=cfg.observe_every)
    summary = {"engine": "langevin", "dt": dt, "steps": n_steps, "walkers": cfg.walkers}
    if estimates:
        worst = max((b.psi - a.psi) / math.hypot(a.stderr, b.stderr) if (a.stderr or b.stderr) else 0.0
                    for a, b in zip(estimates[:-1], estimates[1:])) if len(estimates) > 1 else -math.inf
        summary.update(psi_initial=estimates[0].psi, psi_final=estimates[-1].psi,
                       max_rise_in_stderr=worst, verdict="PASS" if worst <= 3.0 else "FAIL")
    else:
        summary["verdict"] = "N/A"
    _write_relax_outputs(cfg, reports, observables, snapshots, chain.N if chain.N <= 2 else 1)
    summary["mean_end_final"] = float(res.final.positions[:, -1].mean())
    return _write_summary(cfg, summary)


def _write_relax_outputs(cfg, reports, observables, snapshots, dim):
    meta = cfg.meta()
    write_csv(_out(cfg, "thermo.csv"), list(thermo.ThermoReport.FIELDS), reports, meta)
    write_csv(_out(cfg, "observables.csv"), ["t", "observable_name", "value"], observables, meta)
    write_csv(_out(cfg, "density_snapshots.csv"), density_columns(dim, with_time=True), snapshots, meta)


def run_validate(cfg):
    """Run the invariant suite; returns ``(all_passed, checks)``."""
    desk = validation._desk_chain(cfg.chain)
    lo, hi = desk.domain.bounds
    try:
        FPSolverConfig.for_chain(desk, Grid.uniform(lo, hi, cfg.cells), cfg.dt)
    except StabilityViolation as exc:
        raise ConfigError("numerics.dt", str(exc)) from None
    checks = validation.run_suite(cfg.chain, cfg.cells, cfg.dt, cfg.tolerances, cfg.seed)
    write_csv(_out(cfg, "validation.csv"), ["module", "invariant", "passed", "value", "limit"],
              checks, cfg.meta())
    return all(c.passed for c in checks), checks


RUNNERS = {
    "equilibrium": run_equilibrium,
    "fluctuation": run_fluctuation,
    "relax": run_relax,
}
