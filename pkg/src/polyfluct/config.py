"""INI experiment configuration: parsing, validation and hashing."""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .equilibrium import ChainModel
from .errors import ConfigError
from .potential import POTENTIALS, CoordinateDomain, DomainKind, make_potential, suggest_cutoff

EXPERIMENTS = ("equilibrium", "fluctuation", "relax", "validate")
ENGINES = ("fp", "langevin")
INITIAL = ("gaussian", "boltzmann")
MIN_RESOLUTION = 16

DEFAULT_TOLERANCES = {
    "mass": 1e-12,
    "stationarity": 1e-6,
    "decomposition": 1e-8,
    "h_theorem": 1e-10,
    "gradient": 1e-6,
    "flux_identity": 1e-10,
    "convolution": 1e-8,
    "significance": 0.01,
}

# keys that change how a run executes but not what it computes
_UNHASHED = {("numerics", "workers"), ("run", "output_dir")}


@dataclass
class ExperimentConfig:
    experiment: str
    chain: ChainModel
    seed: int
    output_dir: Path
    cells: int = 512
    dt: float | None = None
    t_final: float = 3.0
    walkers: int = 100_000
    bins: int = 8
    repeats: int = 100
    n_list: tuple = (100, 1000, 10000)
    sweep_nu: tuple | None = None
    engine: str = "fp"
    observe_every: int = 100
    initial: str = "gaussian"
    initial_mean: tuple = (2.0,)
    initial_std: tuple = (0.5,)
    workers: int = 1
    snapshots: int = 5
    dump_chains: int = 100
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    sections: dict = field(default_factory=dict, repr=False)

    @property
    def config_hash(self):
        canon = {
            sec: {k: v for k, v in items.items() if (sec, k) not in _UNHASHED}
            for sec, items in self.sections.items()
        }
        blob = json.dumps(canon, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def meta(self, **extra):
        return {"config_hash": self.config_hash, "seed": self.seed, **extra}


def _get(parser, section, key, convert, default=None, required=False):
    if parser.has_option(section, key):
        raw = parser.get(section, key).strip()
        try:
            return convert(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}: {exc}") from None
    if required:
        raise ConfigError(f"{section}.{key}", "is required")
    return default


def _floats(raw):
    return tuple(float(v) for v in raw.replace(",", " ").split())


def _ints(raw):
    return tuple(int(v) for v in raw.replace(",", " ").split())


def _positive(name, value, integer=False):
    if value is None:
        return
    if integer and int(value) != value:
        raise ConfigError(name, f"must be an integer, got {value!r}")
    if not value > 0:
        raise ConfigError(name, f"must be positive, got {value!r}")


def parse_config(text, overrides=None):
    """Parse INI text into a validated ExperimentConfig.

    ``overrides`` maps ``"section.key"`` to replacement strings (used by the
    command line for the seed, engine and output directory).
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc)) from None
    for dotted, value in (overrides or {}).items():
        sec, _, key = dotted.partition(".")
        if not parser.has_section(sec):
            parser.add_section(sec)
        parser.set(sec, key, str(value))

    experiment = _get(parser, "experiment", "kind", str, required=True)
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment.kind", f"must be one of {EXPERIMENTS}")

    seed = _get(parser, "run", "seed", int, required=True)
    if not 0 <= seed < 2**64:
        raise ConfigError("run.seed", "must be an unsigned 64-bit integer")
    output_dir = Path(_get(parser, "run", "output_dir", str, default="output"))

    name = _get(parser, "potential", "name", str, default="harmonic")
    if name not in POTENTIALS:
        raise ConfigError("potential.name", f"unknown potential; choose from {sorted(POTENTIALS)}")
    params = {k: v for k, v in parser.items("potential")} if parser.has_section("potential") else {}
    params.pop("name", None)
    try:
        phi = make_potential(name, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError("potential", str(exc)) from None

    N = _get(parser, "chain", "N", int, default=1)
    kBT = _get(parser, "chain", "kBT", float, default=1.0)
    eta = _get(parser, "chain", "eta", float, default=1.0)
    _positive("chain.N", N, integer=True)
    _positive("chain.kBT", kBT)
    _positive("chain.eta", eta)
    kind = _get(parser, "chain", "domain", str, default="full_line")
    try:
        kind = DomainKind(kind)
    except ValueError:
        raise ConfigError("chain.domain", "must be half_line or full_line") from None
    cutoff = _get(parser, "chain", "cutoff", float)
    _positive("chain.cutoff", cutoff)
    if cutoff is None:
        cutoff = suggest_cutoff(phi, kBT, kind)
    chain = ChainModel(N, phi, kBT, eta, CoordinateDomain(kind, cutoff))

    num = "numerics"
    cfg = ExperimentConfig(
        experiment=experiment,
        chain=chain,
        seed=seed,
        output_dir=output_dir,
        cells=_get(parser, num, "cells", int, 512),
        dt=_get(parser, num, "dt", float),
        t_final=_get(parser, num, "t_final", float, 3.0),
        walkers=_get(parser, num, "walkers", int, 100_000),
        bins=_get(parser, num, "bins", int, 8),
        repeats=_get(parser, num, "repeats", int, 100),
        n_list=_get(parser, num, "n_list", _ints, (100, 1000, 10000)),
        sweep_nu=_get(parser, num, "sweep_nu", _floats),
        engine=_get(parser, num, "engine", str, "fp"),
        observe_every=_get(parser, num, "observe_every", int, 100),
        initial=_get(parser, num, "initial", str, "gaussian"),
        initial_mean=_get(parser, num, "initial_mean", _floats, (2.0,)),
        initial_std=_get(parser, num, "initial_std", _floats, (0.5,)),
        workers=_get(parser, num, "workers", int, 1),
        snapshots=_get(parser, num, "snapshots", int, 5),
        dump_chains=_get(parser, num, "dump_chains", int, 100),
    )
    for key in ("cells", "walkers", "bins", "repeats", "observe_every", "workers", "snapshots", "dump_chains"):
        _positive(f"{num}.{key}", getattr(cfg, key), integer=True)
    for key in ("dt", "t_final"):
        _positive(f"{num}.{key}", getattr(cfg, key))
    for i, n in enumerate(cfg.n_list):
        _positive(f"{num}.n_list[{i}]", n, integer=True)
    for v in cfg.initial_std:
        _positive(f"{num}.initial_std", v)
    if cfg.cells < MIN_RESOLUTION:
        raise ConfigError(f"{num}.cells", f"resolution must be at least {MIN_RESOLUTION}")
    if cfg.bins < 2:
        raise ConfigError(f"{num}.bins", "need at least two bins")
    if cfg.engine not in ENGINES:
        raise ConfigError(f"{num}.engine", f"must be one of {ENGINES}")
    if cfg.initial not in INITIAL:
        raise ConfigError(f"{num}.initial", f"must be one of {INITIAL}")

    if parser.has_section("tolerances"):
        for key, raw in parser.items("tolerances"):
            if key not in DEFAULT_TOLERANCES:
                raise ConfigError(f"tolerances.{key}", "unknown tolerance")
            value = _get(parser, "tolerances", key, float)
            if not value > 0:
                raise ConfigError(f"tolerances.{key}", f"must be positive, got {value!r}")
            cfg.tolerances[key] = value

    cfg.sections = {sec: dict(parser.items(sec)) for sec in parser.sections()}
    cfg.sections.setdefault("chain", {})["cutoff"] = repr(cutoff)
    return cfg


def load_config(path, overrides=None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    return parse_config(text, overrides)
