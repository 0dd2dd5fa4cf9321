import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdihu.fluid import FluidModel, mobilities
from mdihu.flux import (
    DEFAULT_LIMITER,
    SchemeConfig,
    harmonic_pair,
    ihu_fluxes_given_ut,
    ihu_two_point,
    limiter_eval,
    omega_viscous,
    ppu_flux,
    region_fluxes,
    upwind_average,
    viscous_coupling,
)
from mdihu.verify import sample_regions

MODEL = FluidModel()


def _nb(x):
    return np.roll(x, -1, axis=-1)


def test_scheme_config_defaults():
    assert SchemeConfig().scheme == "MULTID_IHU"
    assert SchemeConfig().limiter == "SMU4"
    assert SchemeConfig("MULTID_PPU").limiter == DEFAULT_LIMITER["MULTID_PPU"]
    assert SchemeConfig("IHU_1D", limiter="SMU4").limiter == "ZERO"
    assert SchemeConfig("IHU_1D").is_ihu and not SchemeConfig("PPU_1D").is_ihu
    with pytest.raises(ValueError):
        SchemeConfig("UPWIND")
    with pytest.raises(ValueError):
        SchemeConfig(limiter="MINMOD")


@pytest.mark.parametrize("kind", ["ZERO", "TMU", "SMU", "SMU4"])
def test_limiter_range_and_derivative(kind):
    r = np.concatenate([np.linspace(0.0, 5.0, 501)[1:], [1e3, 1e7]])
    phi, dphi = limiter_eval(kind, r)
    assert np.all((phi >= 0) & (phi <= 1))
    assert np.all(dphi >= 0)
    if kind != "TMU":
        h = 1e-6 * r
        fd = (limiter_eval(kind, r + h)[0] - limiter_eval(kind, r - h)[0]) / (2 * h)
        np.testing.assert_allclose(dphi, fd, rtol=1e-5, atol=1e-12)


@given(st.floats(1e-6, 1e6))
def test_smu4_symmetry(r):
    a = limiter_eval("SMU4", np.array([1.0 / r]))[0][0]
    b = limiter_eval("SMU4", np.array([r]))[0][0] / r
    assert a == pytest.approx(b, rel=1e-13, abs=1e-300)


def test_harmonic_pair():
    h, da, db = harmonic_pair(np.array([1.0, 0.0]), np.array([3.0, 2.0]))
    np.testing.assert_allclose(h, [0.75, 0.0])
    np.testing.assert_allclose(da, [9 / 16, 1.0])
    np.testing.assert_allclose(db, [1 / 16, 0.0])


def test_ppu_1d_matches_two_point_oracle():
    smp = sample_regions(500, seed=3)
    ev = region_fluxes(SchemeConfig("PPU_1D"), smp.T, smp.dz, MODEL, smp.p, smp.S)
    Fw, Fn = ppu_flux(smp.T, smp.p - _nb(smp.p), smp.dz, smp.S, _nb(smp.S), MODEL)
    np.testing.assert_allclose(ev.F_w, Fw, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(ev.F_nw, Fn, rtol=1e-13, atol=1e-15)


def test_ihu_1d_matches_two_point_oracle():
    smp = sample_regions(500, seed=4)
    ev = ihu_fluxes_given_ut(SchemeConfig("IHU_1D"), smp.T, smp.dz, MODEL, smp.uT, smp.S, want_jac=False)
    Fw, Fn = ihu_two_point(smp.T, smp.uT, smp.dz, smp.S, _nb(smp.S), MODEL)
    np.testing.assert_allclose(ev.F_w, Fw, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(ev.F_nw, Fn, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("scheme", ["PPU_1D", "IHU_1D", "MULTID_PPU", "MULTID_IHU"])
def test_phase_fluxes_sum_to_total(scheme):
    smp = sample_regions(300, seed=5)
    ev = region_fluxes(SchemeConfig(scheme), smp.T, smp.dz, MODEL, smp.p, smp.S)
    np.testing.assert_allclose(ev.F_w + ev.F_nw, ev.uT, rtol=1e-12, atol=1e-14)


def test_uniform_saturation_without_gravity_gives_fractional_flow():
    model = FluidModel(g=0.0)
    smp = sample_regions(200, seed=6)
    S = np.full_like(smp.S, 0.4)
    ev = region_fluxes(SchemeConfig("MULTID_IHU"), smp.T, smp.dz, model, smp.p, S)
    mob = mobilities(model, 0.4)
    np.testing.assert_allclose(ev.F_w, mob.lam_w / mob.lam_T * ev.uT, rtol=1e-12, atol=1e-15)


def test_no_flow_at_hydrostatic_single_phase():
    # S = 1 everywhere and a hydrostatic wetting pressure: nothing moves
    model = MODEL
    T = np.ones((1, 4))
    depth = np.array([[0.0, 1.0, 2.0, 1.0]])
    dz = _nb(depth) - depth
    p = model.rho_g[0] * depth
    for scheme in ("PPU_1D", "IHU_1D", "MULTID_PPU", "MULTID_IHU"):
        ev = region_fluxes(SchemeConfig(scheme), T, dz, model, p, np.ones((1, 4)))
        np.testing.assert_allclose(ev.F_w, 0.0, atol=1e-14)
        np.testing.assert_allclose(ev.uT, 0.0, atol=1e-14)


@pytest.mark.parametrize("limiter", ["SMU", "SMU4"])
def test_coupling_matrix_rows(limiter):
    smp = sample_regions(1000, seed=7)
    chi = np.random.default_rng(0).uniform(0, 1, (1000, 4))
    avg, _, A, B, C, omega = upwind_average(smp.uT, None, chi, np.zeros_like(chi), limiter, want_jac=False)
    np.testing.assert_allclose(C.sum(axis=-1), 1.0, atol=1e-12)
    assert np.all(C >= -1e-15)
    assert np.all((avg >= -1e-15) & (avg <= 1 + 1e-15))


def test_zero_limiter_reduces_to_upwind_values():
    v = np.array([[1.0, -2.0, 3.0, -0.5]])
    omega, _ = omega_viscous(v, "ZERO")
    A, B = viscous_coupling(v, omega)
    chi = np.array([[0.1, 0.2, 0.3, 0.4]])
    avg, *_ = upwind_average(v, None, chi, np.zeros_like(chi), "ZERO", want_jac=False)
    # positive flux takes the owner vertex k, negative the next vertex k+1
    np.testing.assert_allclose(avg, [[0.1, 0.3, 0.3, 0.1]])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_multid_ihu_jacobian_directional(seed):
    rng = np.random.default_rng(seed)
    cfg = SchemeConfig("MULTID_IHU")
    T = rng.uniform(0.1, 2, (1, 4))
    a, b = rng.uniform(-1, 1, 2)
    dz = np.array([[a, b, -a, -b]])
    p = rng.uniform(-1, 1, (1, 4))
    S = rng.uniform(0.05, 0.95, (1, 4))
    d = rng.normal(size=8)
    ev = region_fluxes(cfg, T, dz, MODEL, p, S)
    h = 1e-6
    up = region_fluxes(cfg, T, dz, MODEL, p + h * d[:4], S + h * d[4:], want_jac=False)
    dn = region_fluxes(cfg, T, dz, MODEL, p - h * d[:4], S - h * d[4:], want_jac=False)
    fd = (up.F_w - dn.F_w) / (2 * h)
    an = ev.dF_w[0] @ d
    scale = np.abs(ev.dF_w).max() * np.abs(d).max()
    assert np.max(np.abs(fd - an)) <= 1e-5 * scale
