import numpy as np
import pytest

from polyfluct import DensityField, Grid
from polyfluct.grid import histogram_density


def test_grid_geometry():
    g = Grid.uniform(-1.0, 1.0, 4)
    assert g.dim == 1 and g.spacing == (0.5,)
    np.testing.assert_allclose(g.centers[0], [-0.75, -0.25, 0.25, 0.75])
    s = Grid.square(0.0, 2.0, 4)
    assert s.shape == (4, 4) and s.cell_volume == 0.25
    assert Grid.from_edges(np.linspace(-1, 1, 5)) == g
    with pytest.raises(ValueError):
        Grid.from_edges([0.0, 1.0, 3.0])


def test_grid_equality_survives_roundoff():
    assert Grid.uniform(-26.98, 1.0, 3) == Grid.uniform(-26.979999999999997, 1.0, 3)
    assert hash(Grid.uniform(0.1 + 0.2, 1, 2)) == hash(Grid.uniform(0.3, 1, 2))


def test_density_validation():
    g = Grid.uniform(0.0, 1.0, 2)
    with pytest.raises(ValueError):
        DensityField(g, [1.0, 2.0])
    with pytest.raises(ValueError):
        DensityField(g, [2.5, -0.5])
    P = DensityField.normalized(g, [1.0, 3.0])
    np.testing.assert_allclose(P.masses, [0.25, 0.75])
    assert P.mean() == pytest.approx(0.25 * 0.25 + 0.75 * 0.75)
    assert P.cdf(0.5) == pytest.approx(0.25)
    assert P.cdf(0.75) == pytest.approx(0.625)
    with pytest.raises(ValueError):
        P.values[0] = 1.0


def test_coarsen_preserves_mass(rng):
    g = Grid.square(-1.0, 1.0, 8)
    P = DensityField.normalized(g, rng.random((8, 8)))
    C = P.coarsen(4)
    assert C.grid.shape == (2, 2)
    assert C.masses.sum() == pytest.approx(1.0)
    assert C.masses[0, 0] == pytest.approx(P.masses[:4, :4].sum())


def test_histogram_drops_outside_samples():
    H = histogram_density([0.1, 0.2, 0.9, 5.0], Grid.uniform(0.0, 1.0, 2))
    np.testing.assert_allclose(H.masses, [2 / 3, 1 / 3])
