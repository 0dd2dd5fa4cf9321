import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdihu.fluid import (
    DegenerateMobilityError,
    FluidModel,
    MobilitySet,
    clamp_saturation,
    fractional_flow_slope_max,
    mobilities,
    relperm,
    vertex_chi,
)


def test_relperm_endpoints():
    m = FluidModel()
    krw, krnw, dkrw, dkrnw = relperm(m, np.array([0.0, 1.0]))
    np.testing.assert_allclose(krw, [0.0, 1.0])
    np.testing.assert_allclose(krnw, [1.0, 0.0])
    np.testing.assert_allclose(dkrw, [0.0, 2.0])
    np.testing.assert_allclose(dkrnw, [-4.0, 0.0])


def test_relperm_clamps_outside_unit_interval():
    m = FluidModel()
    krw, krnw, dkrw, dkrnw = relperm(m, np.array([-0.1, 1.2]))
    np.testing.assert_allclose(krw, [0.0, 1.0])
    np.testing.assert_allclose(dkrw, [0.0, 0.0])
    np.testing.assert_allclose(dkrnw, [0.0, 0.0])


@given(st.floats(0.01, 0.99))
def test_mobility_derivatives_match_complex_step(s):
    m = FluidModel()
    h = 1e-30
    mob = mobilities(m, np.array([s]))
    mc = mobilities(m, np.array([s + 1j * h]))
    np.testing.assert_allclose(mob.dlam_w_dS, mc.lam_w.imag / h, rtol=1e-12)
    np.testing.assert_allclose(mob.dlam_nw_dS, mc.lam_nw.imag / h, rtol=1e-12)


@given(st.floats(0.0, 1.0))
def test_chi_sums_to_one(s):
    chi_w, chi_nw, dw, dnw = vertex_chi(mobilities(FluidModel(), np.array([s])))
    assert chi_w[0] + chi_nw[0] == 1.0
    assert dw[0] == -dnw[0]


def test_vertex_chi_rejects_zero_total_mobility():
    mob = MobilitySet(np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1))
    with pytest.raises(DegenerateMobilityError):
        vertex_chi(mob)


def test_model_validation():
    with pytest.raises(ValueError):
        FluidModel(mu_w=0.0)
    with pytest.raises(ValueError):
        FluidModel(w_exponent=0.5)


def test_clamp_keeps_imaginary_part():
    s, inside = clamp_saturation(np.array([0.5 + 1e-30j]))
    assert s[0].imag == 1e-30 and inside[0]


def test_fractional_flow_slope_positive():
    assert fractional_flow_slope_max(FluidModel()) > 1.0
