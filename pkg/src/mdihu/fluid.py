"""Rock-fluid properties: Corey relative permeabilities and phase mobilities.

All functions accept scalars or numpy arrays (including complex arrays, so that
complex-step differentiation can be pushed through the flux kernels).
Saturations are clamped to [0, 1] on their real part before evaluation.
"""

from dataclasses import dataclass

import numpy as np

from .units import GRAVITY

# Lower bound used to check that the total mobility stays away from zero.
MOBILITY_EPS = 1e-12


class DegenerateMobilityError(ValueError):
    pass


@dataclass(frozen=True)
class FluidModel:
    """Two incompressible phases with Corey relative permeabilities.

    ``w_exponent`` and ``nw_exponent`` are the Corey exponents of
    ``krw = S**a`` and ``krnw = (1 - S)**b``.  ``g`` is in consistent units,
    i.e. ``rho * g`` is a pressure gradient (psi/ft by default).
    """

    rho_w: float = 64.0
    rho_nw: float = 32.0
    mu_w: float = 1.0
    mu_nw: float = 100.0
    w_exponent: float = 2.0
    nw_exponent: float = 4.0
    g: float = GRAVITY

    def __post_init__(self):
        for name in ("rho_w", "rho_nw", "mu_w", "mu_nw"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.w_exponent < 1 or self.nw_exponent < 1:
            raise ValueError("Corey exponents must be >= 1")
        if self.g < 0:
            raise ValueError("g must be nonnegative")

    @property
    def rho_g(self):
        """Phase weights ``(rho_w g, rho_nw g)``."""
        return self.rho_w * self.g, self.rho_nw * self.g


@dataclass
class MobilitySet:
    lam_w: np.ndarray
    lam_nw: np.ndarray
    dlam_w_dS: np.ndarray
    dlam_nw_dS: np.ndarray

    @property
    def lam_T(self):
        return self.lam_w + self.lam_nw

    @property
    def dlam_T_dS(self):
        return self.dlam_w_dS + self.dlam_nw_dS


def clamp_saturation(S):
    """Clamp to [0, 1] on the real part; returns (clamped, inside-mask)."""
    S = np.asarray(S)
    re = S.real
    inside = (re >= 0.0) & (re <= 1.0)
    Sc = np.where(re < 0.0, 0.0, np.where(re > 1.0, 1.0, S))
    return Sc, inside


def _power(x, a):
    # x**a with x**0 == 1 and 0**(a-1) well defined for a >= 1
    if a == 1.0:
        return x
    return x**a


def relperm(model, S):
    """Return ``(krw, krnw, dkrw_dS, dkrnw_dS)`` at wetting saturation ``S``."""
    Sc, inside = clamp_saturation(S)
    a, b = model.w_exponent, model.nw_exponent
    krw = _power(Sc, a)
    krnw = _power(1.0 - Sc, b)
    dkrw = a * _power(Sc, a - 1.0) if a != 1.0 else np.ones_like(Sc)
    dkrnw = -b * _power(1.0 - Sc, b - 1.0) if b != 1.0 else -np.ones_like(Sc)
    dkrw = np.where(inside, dkrw, 0.0)
    dkrnw = np.where(inside, dkrnw, 0.0)
    return krw, krnw, dkrw, dkrnw


def mobilities(model, S):
    krw, krnw, dkrw, dkrnw = relperm(model, S)
    return MobilitySet(
        lam_w=krw / model.mu_w,
        lam_nw=krnw / model.mu_nw,
        dlam_w_dS=dkrw / model.mu_w,
        dlam_nw_dS=dkrnw / model.mu_nw,
    )


def vertex_chi(mob):
    """Mobility ratios ``chi_l = lam_l / lam_T`` and their S-derivatives.

    Returns ``(chi_w, chi_nw, dchi_w_dS, dchi_nw_dS)``.  ``chi_nw`` is formed as
    ``1 - chi_w`` so that the two ratios sum to one exactly.
    """
    lam_T = mob.lam_T
    if np.any(np.abs(lam_T) < MOBILITY_EPS):
        raise DegenerateMobilityError("total mobility below epsilon")
    chi_w = mob.lam_w / lam_T
    chi_nw = 1.0 - chi_w
    dchi_w = (mob.dlam_w_dS * mob.lam_nw - mob.lam_w * mob.dlam_nw_dS) / lam_T**2
    return chi_w, chi_nw, dchi_w, -dchi_w


def fractional_flow_slope_max(model, n=2001):
    """max over S of |d(lam_w/lam_T)/dS|, sampled on a uniform grid."""
    S = np.linspace(0.0, 1.0, n)
    _, _, dchi, _ = vertex_chi(mobilities(model, S))
    return float(np.max(np.abs(dchi)))
