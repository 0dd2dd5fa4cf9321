import numpy as np
import pytest

from mdihu.grid import (
    InvalidGridError,
    build_dual,
    build_grid,
    half_transmissibility,
    load_array_file,
    rotate_coords,
)
from mdihu.units import DARCY


def test_build_grid_samples_cell_centers():
    g = build_grid(4, 3, (0.0, 4.0, 0.0, 3.0), lambda x, y: 1.0 + x, 0.5, lambda x, y: y)
    X, Y = g.cell_centers()
    np.testing.assert_allclose(g.perm, 1.0 + X)
    np.testing.assert_allclose(g.depth, Y)
    assert g.n_cells == 12
    assert g.index(1, 2) == 9
    assert g.locate(1.5, 2.5) == 9


def test_invalid_grids():
    with pytest.raises(InvalidGridError):
        build_grid(1, 4, (0, 1, 0, 1), 1.0)
    with pytest.raises(InvalidGridError):
        build_grid(4, 4, (0, 1, 0, 1), -1.0)
    with pytest.raises(InvalidGridError):
        build_grid(4, 4, (0, 1, 0, 1), 1.0, poro=1.5)


def test_half_transmissibility_harmonic():
    assert half_transmissibility(2.0, 2.0, 0.5, 1.0) == pytest.approx(1.0)
    assert half_transmissibility(1.0, 3.0, 0.5, 1.0) == pytest.approx(0.75)
    with pytest.raises(InvalidGridError):
        half_transmissibility(0.0, 1.0, 0.5, 1.0)


def test_dual_covers_every_interior_half_interface_once():
    g = build_grid(5, 4, (0, 5, 0, 4), 1.0)
    d = build_dual(g)
    assert len(d) == (5 - 1) * (4 - 1)
    pairs = {}
    nb = np.roll(d.cells, -1, axis=1)
    for a, b in zip(d.cells.ravel(), nb.ravel()):
        key = (min(a, b), max(a, b))
        pairs[key] = pairs.get(key, 0) + 1
    # every interior face is split into two half interfaces in two regions
    n_faces = (5 - 1) * 4 + 5 * (4 - 1)
    assert len(pairs) == n_faces
    interior = [k for k, v in pairs.items() if v == 2]
    assert len(interior) == (5 - 1) * (4 - 2) + (5 - 2) * (4 - 1)


def test_dual_transmissibility_units_and_depths():
    g = build_grid(3, 3, (0, 3, 0, 3), 10.0, depth=lambda x, y: 2 * x)
    d = build_dual(g)
    np.testing.assert_allclose(d.half_T, DARCY * g.thickness * 10.0 * 0.5)
    nb = np.roll(d.cells, -1, axis=1)
    np.testing.assert_allclose(d.half_dz, g.depth[nb] - g.depth[d.cells])


def test_rotate_coords_inverse():
    x, y = rotate_coords(1.0, 0.0, np.pi / 2)
    assert x == pytest.approx(0.0, abs=1e-15)
    assert abs(y) == pytest.approx(1.0)
    xr, yr = rotate_coords(*rotate_coords(0.3, -0.7, 0.4), -0.4)
    assert (xr, yr) == pytest.approx((0.3, -0.7))


def test_load_array_file(tmp_path):
    f = tmp_path / "a.txt"
    f.write_text("# header\n1, 2 3\n4\n")
    np.testing.assert_allclose(load_array_file(f, 4), [1, 2, 3, 4])
    with pytest.raises(InvalidGridError):
        load_array_file(f, 5)
