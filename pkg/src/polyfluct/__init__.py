"""Relative entropy as free energy: fluctuations and relaxation of an anchored polymer chain."""

from .dynamics import (
    Ensemble,
    FPSolverConfig,
    LangevinConfig,
    Scheme,
    chain_force,
    chain_potential,
    fp_step,
    gaussian_density,
    langevin_step,
    relax,
)
from .equilibrium import (
    ChainModel,
    ChainState,
    boltzmann_density,
    end_free_energy,
    end_marginal,
    joint_log_density,
    partition_function,
    sample_chain,
    subunit_density,
)
from .fluctuation import (
    BinGrid,
    EmpiricalMeasure,
    empirical_measure,
    fluctuation_free_energy,
    gibbs_entropy,
    multinomial_log_prob,
    relative_entropy,
    sanov_gap,
)
from .grid import DensityField, Grid
from .potential import CoordinateDomain, DomainKind, DoubleWell, Harmonic, SoftWallHarmonic
from .thermo import (
    descent_diagnostic,
    dissipation_rate,
    entropy_production_rate,
    flux_field,
    force_field,
    psi_decomposition,
    psi_functional,
    thermo_report,
)

__version__ = "0.1.0"
