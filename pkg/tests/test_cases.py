import numpy as np
import pytest

from mdihu.cases import (
    CaseSpec,
    FluxRecorder,
    build_case,
    case_gravity_number,
    countercurrent_fraction,
    diagnostics,
    heterogeneous_permeability,
    inner_rim,
    orientation_metric,
    override_fields,
    water_cut,
)
from mdihu.flux import FluxEvaluation, SchemeConfig
from mdihu.solver import Assembler, advance, mass_balance_error


def test_spec_validation():
    with pytest.raises(ValueError):
        CaseSpec("FIVE_SPOT")
    with pytest.raises(ValueError):
        CaseSpec(theta=np.pi / 2)
    with pytest.raises(ValueError):
        CaseSpec(cfl="medium")
    with pytest.raises(ValueError):
        build_case(CaseSpec(params={"no_such_key": 1}))


@pytest.mark.parametrize("case", ["THREE_WELL", "HETEROGENEOUS", "SEGREGATION"])
def test_builders_at_low_resolution(case):
    c = build_case(CaseSpec(case, 0.3, resolution=15))
    assert c.grid.nx == c.grid.ny == 15
    assert c.dt > 0 and c.t_end >= c.dt
    assert c.disc.size > 0
    assert np.all((c.initial.S >= 0) & (c.initial.S <= 1))


def test_three_well_layout():
    c = build_case(CaseSpec("THREE_WELL"))
    assert c.grid.nx == 51
    assert len(c.producers) == 2 and c.injector == c.grid.locate(0.0, 0.0)
    # gravity number reproduced from the rate
    assert case_gravity_number(c) == pytest.approx(1.3)
    # producers lie updip of the injector
    assert all(c.grid.depth[p] < c.grid.depth[c.injector] for p in c.producers)


def test_three_well_rotation_moves_producers():
    a = build_case(CaseSpec("THREE_WELL", 0.0, resolution=25))
    b = build_case(CaseSpec("THREE_WELL", np.pi / 4, resolution=25))
    assert a.producers != b.producers
    assert a.injector == b.injector


def test_heterogeneous_field_and_rim():
    c = build_case(CaseSpec("HETEROGENEOUS", resolution=31))
    assert case_gravity_number(c) == pytest.approx(12.9)
    assert heterogeneous_permeability(0.0, 0.0) == pytest.approx(675.0)
    rim = [cell for cell, _ in c.wells.dirichlet]
    assert set(rim) <= set(c.disc.tolist())
    X, Y = c.grid.cell_centers()
    # the rim is the outermost ring of the disc
    r = np.hypot(X, Y)
    assert r[rim].min() > 0.8 * c.meta["r0"]


def test_inner_rim_of_square():
    from mdihu.grid import build_grid

    g = build_grid(5, 5, (0, 5, 0, 5), 1.0)
    inside = np.zeros(25, dtype=bool)
    inside[[6, 7, 8, 11, 12, 13, 16, 17, 18]] = True
    assert sorted(inner_rim(g, inside)) == [6, 7, 8, 11, 13, 16, 17, 18]


def test_segregation_initial_band_and_barriers():
    c = build_case(CaseSpec("SEGREGATION", resolution=51))
    S0 = c.initial.S
    assert 0 < np.sum(S0[c.disc] == 0.0) < c.disc.size
    assert c.meta["n_barrier"] > 0
    assert c.t_end == pytest.approx(6000.0)


def test_water_cut():
    np.testing.assert_allclose(water_cut([-1.0, 0.0], [-3.0, 0.0]), [0.25, 0.0])


def test_countercurrent_fraction_counts_opposite_signs():
    Fw = np.array([[1.0, -1.0, 1.0, 0.0]])
    Fn = np.array([[1.0, 1.0, -1.0, 1.0]])
    ev = FluxEvaluation(Fw, Fn, Fw + Fn, None, None)
    assert countercurrent_fraction(ev) == pytest.approx(2 / 3)


def test_orientation_metric_zero_for_identical_maps():
    c = build_case(CaseSpec("THREE_WELL", resolution=15))
    S = np.random.default_rng(0).uniform(size=c.grid.n_cells)
    assert orientation_metric(S, S, c.grid, 0.0, c.disc) == 0.0
    assert orientation_metric(S, S, c.grid, np.pi / 4, c.disc) > 0.0


def test_override_fields(tmp_path):
    c = build_case(CaseSpec("THREE_WELL", resolution=15))
    f = tmp_path / "k.txt"
    np.savetxt(f, np.full(c.grid.n_cells, 7.0))
    c2 = override_fields(c, {"perm": str(f)})
    assert np.all(c2.grid.perm == 7.0)
    assert c2.wells.producers[0][2] != c.wells.producers[0][2]


def test_short_run_diagnostics():
    c = build_case(CaseSpec("THREE_WELL", resolution=15, t_end=0.01))
    asm = Assembler(c.dual, c.fluid, SchemeConfig(), c.wells)
    rec = FluxRecorder(c)
    traj = advance(asm, c.initial, c.t_end, c.dt, flux_hook=rec, producer_cells=np.array(c.producers))
    d = diagnostics(c, traj, rec)
    assert d.newton_iterations == traj.total_iterations > 0
    assert d.cfl > 0
    assert d.water_cut.shape == (len(traj.log), 2)
    assert mass_balance_error(c.grid, traj) < 1e-8
