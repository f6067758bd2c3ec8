import pytest

from polyfluct import ChainModel, CoordinateDomain, DomainKind, DoubleWell, Harmonic, SoftWallHarmonic
from polyfluct.validation import run_suite


@pytest.mark.parametrize("chain", [
    ChainModel(1, Harmonic(), domain=CoordinateDomain(DomainKind.FULL_LINE, 8.0)),
    ChainModel(1, DoubleWell(), domain=CoordinateDomain(DomainKind.FULL_LINE, 4.0)),
    ChainModel(1, SoftWallHarmonic(), domain=CoordinateDomain(DomainKind.HALF_LINE, 8.0)),
])
def test_invariant_suite_passes(chain):
    checks = run_suite(chain, cells=256)
    assert {c.module for c in checks} == {"potential", "equilibrium", "fluctuation", "dynamics", "thermo"}
    assert [c.name for c in checks if not c.passed] == []


def test_tightened_tolerance_fails():
    chain = ChainModel(1, Harmonic(), domain=CoordinateDomain(DomainKind.FULL_LINE, 8.0))
    checks = run_suite(chain, cells=256, tolerances={"stationarity": 1e-30})
    assert any(not c.passed for c in checks)
