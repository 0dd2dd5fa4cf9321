import csv
import json

import numpy as np

from mdihu.fluid import FluidModel
from mdihu.flux import SchemeConfig, region_fluxes
from mdihu.verify import (
    assembled_jacobian_check,
    consistency_identities,
    fd_flux_jacobian,
    flipped_omega_kernel,
    format_summary,
    jacobian_states,
    matrix_properties,
    monotonicity_scan,
    reports_to_json,
    sample_regions,
    scheme_identity,
    smu4_symmetry,
    stratified_ut,
    term_monotonicity,
    write_reports_csv,
)

MODEL = FluidModel()


def test_sampler_is_stratified_and_seeded():
    u = stratified_ut(np.random.default_rng(0), 32)
    signs = {tuple(np.sign(r)) for r in u}
    assert len(signs) == 16
    a, b = sample_regions(10, seed=5), sample_regions(10, seed=5)
    np.testing.assert_array_equal(a.S, b.S)


def test_monotonicity_passes_for_all_schemes():
    for scheme in ("PPU_1D", "IHU_1D", "MULTID_PPU", "MULTID_IHU"):
        r = monotonicity_scan(SchemeConfig(scheme), 2000, seed=1)
        assert r.passed, r.row()
    for r in term_monotonicity(SchemeConfig(), 2000, seed=1):
        assert r.passed, r.row()


def test_monotonicity_negative_control_fails_with_reproducer():
    cfg = SchemeConfig("MULTID_IHU")
    r = monotonicity_scan(cfg, 2000, seed=1, kernel=flipped_omega_kernel(cfg, MODEL))
    assert not r.passed
    assert set(r.offending) == {"T", "dz", "uT", "p", "S"}


def test_matrix_properties():
    for lim in ("ZERO", "SMU", "SMU4"):
        assert matrix_properties(lim, 2000, seed=2).passed
    # weights of one (reachable by TMU) lose strict diagonal dominance
    bad = matrix_properties("SMU4", 200, seed=2, forced_omega=1.0)
    assert not bad.passed


def test_identities():
    assert consistency_identities(2000, seed=3).passed
    assert smu4_symmetry(2000, seed=3).passed
    assert scheme_identity(2000, seed=3).passed


def test_flux_jacobian_and_negative_control():
    T, dz, p, S = jacobian_states(200, seed=4)
    cfg = SchemeConfig("MULTID_IHU")
    assert fd_flux_jacobian(cfg, T, dz, MODEL, p, S).passed
    ev = region_fluxes(cfg, T, dz, MODEL, p, S)
    J = np.concatenate([ev.dF_w, ev.duT], axis=1)
    J[:, :, 6] *= 1.01
    bad = fd_flux_jacobian(cfg, T, dz, MODEL, p, S, analytic=J)
    assert not bad.passed
    assert bad.offending["column"] == 6


def test_assembled_jacobian_small():
    r = assembled_jacobian_check(SchemeConfig("IHU_1D"), setups=("wells",), n_states=2)
    assert r.passed, r.row()


def test_report_output(tmp_path):
    reports = [smu4_symmetry(100), scheme_identity(100)]
    path = tmp_path / "r.csv"
    write_reports_csv(reports, path)
    rows = list(csv.DictReader(open(path)))
    assert [r["pass"] for r in rows] == ["1", "1"]
    assert "2/2 checks passed" in format_summary(reports)
    json.dumps(reports_to_json(reports))
