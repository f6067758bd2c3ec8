from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from polyfluct import ChainModel, CoordinateDomain, DomainKind, Harmonic

ROOT = Path(__file__).resolve().parents[1]

# criterion number -> PASS/FAIL line, filled by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])


@dataclass(frozen=True)
class Flat:
    """phi = 0; only meaningful on a bounded domain."""

    name = "flat"

    def value(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def gradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    @property
    def landmarks(self):
        return (0.0,)

    @property
    def scale(self):
        return 1.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ou_chain():
    return ChainModel(1, Harmonic(), domain=CoordinateDomain(DomainKind.FULL_LINE, 8.0))


def write_config(path, experiment, output_dir, **sections):
    """Write an INI config; ``sections`` maps section name to a dict of keys."""
    lines = [f"[experiment]\nkind = {experiment}\n", f"[run]\nseed = 11\noutput_dir = {output_dir}\n"]
    for sec, items in sections.items():
        lines.append(f"[{sec}]")
        lines.extend(f"{k} = {v}" for k, v in items.items())
        lines.append("")
    path.write_text("\n".join(lines))
    return path
