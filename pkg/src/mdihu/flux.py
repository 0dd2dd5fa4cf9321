"""Half-interface fluxes for the four upwinding schemes.

Every kernel works on a batch of interaction regions: per-region arrays have
shape ``(R, 4)`` indexed by half interface ``k`` (joining vertex ``k`` to
``k + 1``) or by vertex.  Derivatives are taken with respect to the eight
local unknowns of a region, ordered ``[p_0..p_3, S_0..S_3]``, and have shape
``(R, 4, 8)``.

Schemes
-------
``PPU_1D``      two-point phase-potential upwinding
``IHU_1D``      two-point implicit hybrid upwinding (viscous / buoyancy split)
``MULTID_PPU``  PPU with mobilities averaged over the interaction region
``MULTID_IHU``  IHU with the mobility ratios of the viscous term and the
                buoyancy mobilities averaged over the interaction region
"""

from dataclasses import dataclass

import numpy as np

from .fluid import mobilities, vertex_chi

SCHEMES = ("PPU_1D", "IHU_1D", "MULTID_PPU", "MULTID_IHU")
LIMITERS = ("ZERO", "TMU", "SMU", "SMU4")
DEFAULT_LIMITER = {"PPU_1D": "ZERO", "IHU_1D": "ZERO", "MULTID_PPU": "SMU", "MULTID_IHU": "SMU4"}

# flux ratios are clipped here before the limiter; every limiter is ~1 there
RATIO_MAX = 1e12

_EYE = np.eye(4)
_NEXT = np.roll(_EYE, 1, axis=1)  # row k selects vertex / interface k+1
_PREV = np.roll(_EYE, -1, axis=1)  # row k selects k-1


class SingularSystemError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    """Upwinding scheme and its knobs.

    ``limiter=None`` picks the scheme default.  One-dimensional schemes always
    run with the ``ZERO`` limiter.  ``c_gamma`` and ``gamma_delta`` set the
    smoothing of the weighted-average mobilities in the IHU total velocity.
    ``freeze_omega`` drops the velocity sensitivity of the multidimensional
    weights from the Jacobian (the residual always uses the true weights).
    It is off by default: the exact Jacobian needs markedly fewer Newton
    iterations on the benchmark cases.  ``c_gamma`` defaults to 1: larger
    values make the blending nearly a switch and cost Newton iterations (and
    time-step cuts) in buoyancy-dominated runs.
    """

    scheme: str = "MULTID_IHU"
    limiter: str | None = None
    c_gamma: float = 1.0
    gamma_delta: float = 1e-9
    freeze_omega: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        lim = self.limiter or DEFAULT_LIMITER[self.scheme]
        if self.scheme.endswith("_1D"):
            lim = "ZERO"
        if lim not in LIMITERS:
            raise ValueError(f"unknown limiter {lim!r}")
        object.__setattr__(self, "limiter", lim)

    @property
    def is_ihu(self):
        return self.scheme in ("IHU_1D", "MULTID_IHU")


# ---------------------------------------------------------------------------
# limiters


def limiter_eval(kind, r):
    """Limiter value and derivative at nonnegative ratio ``r``."""
    r = np.asarray(r, dtype=float)
    if kind == "ZERO":
        return np.zeros_like(r), np.zeros_like(r)
    if kind == "TMU":
        return np.minimum(1.0, r), np.where(r < 1.0, 1.0, 0.0)
    if kind == "SMU":
        return r / (1.0 + r), 1.0 / (1.0 + r) ** 2
    if kind == "SMU4":
        # large ratios: use phi(r) = 1 - 1/D with D ~ r^4 to avoid overflow
        big = r > 1e6
        rs = np.where(big, 1.0, r)
        num = rs * (1.0 + rs * (1.0 + rs * (1.0 + rs)))
        den = num + 1.0
        dnum = 1.0 + rs * (2.0 + rs * (3.0 + 4.0 * rs))
        phi = np.where(big, 1.0 - 1.0 / np.maximum(r, 1.0) ** 4, num / den)
        dphi = np.where(big, 4.0 / np.maximum(r, 1.0) ** 5, dnum / den**2)
        return phi, dphi
    raise ValueError(f"unknown limiter {kind!r}")


# ---------------------------------------------------------------------------
# viscous coupling


def omega_viscous(v, limiter):
    """Upwind weights for all four half interfaces of each region.

    ``v`` holds the interface fluxes driving the upwinding (total velocities
    for IHU, phase potential fluxes for PPU).  Returns ``(omega, domega_dv)``
    with ``domega_dv[..., k, i] = d omega_k / d v_i``.
    """
    v = np.asarray(v, dtype=float)
    pos = v > 0
    nonzero = v != 0
    nb_val = np.where(pos, np.roll(v, 1, axis=-1), np.roll(v, -1, axis=-1))
    safe_v = np.where(nonzero, v, 1.0)
    ratio = np.where(nonzero, nb_val / safe_v, 0.0)
    r = np.clip(ratio, 0.0, RATIO_MAX)
    phi, dphi = limiter_eval(limiter, r)
    omega = np.where(nonzero, phi, 0.0)
    live = nonzero & (ratio > 0.0) & (ratio < RATIO_MAX)
    dw_dr = np.where(live, dphi, 0.0)
    d_own = -dw_dr * ratio / safe_v
    d_nb = dw_dr / safe_v
    nb_sel = np.where((v >= 0)[..., None], _PREV, _NEXT)
    domega = d_own[..., None] * _EYE + d_nb[..., None] * nb_sel
    return omega, domega


def viscous_coupling(v, omega):
    """Local coupling matrices ``A`` (unit diagonal M-matrix) and ``B`` (>= 0)."""
    v = np.asarray(v, dtype=float)
    down = (v >= 0)[..., None]
    A = _EYE - omega[..., None] * np.where(down, _PREV, _NEXT)
    B = (1.0 - omega)[..., None] * np.where(down, _EYE, _NEXT)
    return A, B


def _solve(A, rhs):
    try:
        return np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - construction bug
        raise SingularSystemError(str(exc)) from exc


def interfacial_chi(A, B, chi):
    """Interfacial averages ``A^-1 B chi``; returns ``(chi_bar, C)``."""
    C = _solve(A, B)
    chi_bar = (C @ np.asarray(chi)[..., None])[..., 0]
    return chi_bar, C


def chi_derivatives(A, B, v, chi_bar, chi, dchi_dS, domega_dtau):
    """Derivatives of the interfacial averages w.r.t. the 8 local unknowns.

    Differentiates ``A chi_bar = B chi``: row ``k`` reads
    ``chi_bar_k - w_k chi_bar_nb = (1 - w_k) chi_up`` so that
    ``A dchi_bar = dw (chi_bar_nb - chi_up) + (1 - w) dchi_up``.
    ``domega_dtau`` may be ``None`` for frozen weights.
    """
    down = (np.asarray(v) >= 0)[..., None]
    nb_sel = np.where(down, _PREV, _NEXT)
    up_sel = np.where(down, _EYE, _NEXT)
    shape = np.shape(chi_bar) + (8,)
    rhs = np.zeros(shape, dtype=np.result_type(chi_bar, dchi_dS))
    rhs[..., 4:] = B * dchi_dS[..., None, :]
    if domega_dtau is not None:
        jump = np.einsum("...ki,...i->...k", nb_sel, chi_bar) - np.einsum(
            "...ki,...i->...k", up_sel, chi
        )
        rhs += domega_dtau * jump[..., None]
    return _solve(A, rhs)


def upwind_average(v, dv_dtau, vals, dvals_dS, limiter, freeze=False, want_jac=True):
    """Region-coupled upwind average of vertex values driven by fluxes ``v``.

    Returns ``(avg, davg, A, B, C, omega)``.  ``davg`` is ``None`` when
    ``want_jac`` is false.
    """
    omega, domega_dv = omega_viscous(v, limiter)
    A, B = viscous_coupling(v, omega)
    avg, C = interfacial_chi(A, B, vals)
    davg = None
    if want_jac:
        domega_dtau = None
        if not freeze and limiter != "ZERO":
            domega_dtau = np.einsum("...ki,...it->...kt", domega_dv, dv_dtau)
        davg = chi_derivatives(A, B, v, avg, vals, dvals_dS, domega_dtau)
    return avg, davg, A, B, C, omega


# ---------------------------------------------------------------------------
# buoyancy


def harmonic_pair(a, b):
    """``a b / (a + b)`` (0 when both vanish) and its partial derivatives."""
    s = a + b
    zero = s == 0
    safe = np.where(zero, 1.0, s)
    h = np.where(zero, 0.0, a * b / safe)
    da = np.where(zero, 0.0, b * b / safe**2)
    db = np.where(zero, 0.0, a * a / safe**2)
    return h, da, db


def omega_gravity(T, dz, limiter):
    """Geometric buoyancy weights and the branch taken at each half interface.

    ``branch`` is 1 when the next interface continues in the same vertical
    direction, 2 when the previous one does, 0 otherwise.
    """
    T = np.asarray(T, dtype=float)
    dz = np.asarray(dz, dtype=float)
    Tdz = T * dz
    b1 = dz * np.roll(dz, -1, axis=-1) > 0
    b2 = ~b1 & (dz * np.roll(dz, 1, axis=-1) > 0)
    own = np.where(Tdz == 0, 1.0, Tdz)
    ratio = np.where(b1, np.roll(Tdz, -1, axis=-1) / own, np.where(b2, np.roll(Tdz, 1, axis=-1) / own, 0.0))
    phi, _ = limiter_eval(limiter, np.clip(ratio, 0.0, RATIO_MAX))
    omega = np.where(b1 | b2, phi, 0.0)
    branch = np.where(b1, 1, np.where(b2, 2, 0))
    return omega, branch


@dataclass
class BuoyancyStencil:
    """State-independent part of the buoyancy term of every half interface.

    ``coef = T (rho_w - rho_nw) g dz``.  ``w_first`` marks interfaces where the
    wetting phase takes the first slot of the harmonic pairs (it is the phase
    moving from vertex k to k+1).  ``ia*``/``ib*`` are the vertex indices of the
    first/second slot of the direct pair (0) and the weighted pair (1).
    """

    coef: np.ndarray
    w_first: np.ndarray
    omega: np.ndarray
    branch: np.ndarray
    ia0: np.ndarray
    ib0: np.ndarray
    ia1: np.ndarray
    ib1: np.ndarray


def buoyancy_stencil(T, dz, model, limiter):
    T = np.asarray(T, dtype=float)
    dz = np.asarray(dz, dtype=float)
    omega, branch = omega_gravity(T, dz, limiter)
    k = np.broadcast_to(np.arange(4), T.shape)
    ia0 = k
    ib0 = (k + 1) % 4
    ia1 = np.where(branch == 2, (k - 1) % 4, k)
    ib1 = np.where(branch == 1, (k + 2) % 4, (k + 1) % 4)
    drho = model.rho_w - model.rho_nw
    coef = T * drho * model.g * dz
    return BuoyancyStencil(coef, drho * dz > 0, omega, branch, ia0, ib0, ia1, ib1)


def _gather(x, idx):
    return np.take_along_axis(x, idx, axis=-1)


def _onehot(idx):
    return (idx[..., None] == np.arange(4)).astype(float)


def buoyancy_psi(st, mob, want_jac=True):
    """Weighted harmonic mobility ``psi_bar_{w,nw}`` at each half interface.

    Returns ``(psi, dpsi_dS)`` with ``dpsi_dS[..., k, v]`` the derivative with
    respect to the wetting saturation at vertex ``v``.
    """
    wf = st.w_first

    def slot(idx, first):
        use_w = wf if first else ~wf
        lam = np.where(use_w, _gather(mob.lam_w, idx), _gather(mob.lam_nw, idx))
        dlam = np.where(use_w, _gather(mob.dlam_w_dS, idx), _gather(mob.dlam_nw_dS, idx))
        return lam, dlam

    la0, dla0 = slot(st.ia0, True)
    lb0, dlb0 = slot(st.ib0, False)
    la1, dla1 = slot(st.ia1, True)
    lb1, dlb1 = slot(st.ib1, False)
    h0, h0a, h0b = harmonic_pair(la0, lb0)
    h1, h1a, h1b = harmonic_pair(la1, lb1)
    w = st.omega
    psi = (1.0 - w) * h0 + w * h1
    if not want_jac:
        return psi, None
    dpsi = (
        ((1.0 - w) * h0a * dla0)[..., None] * _onehot(st.ia0)
        + ((1.0 - w) * h0b * dlb0)[..., None] * _onehot(st.ib0)
        + (w * h1a * dla1)[..., None] * _onehot(st.ia1)
        + (w * h1b * dlb1)[..., None] * _onehot(st.ib1)
    )
    return psi, dpsi


def buoyancy_flux(st, mob, want_jac=True):
    """Wetting buoyancy flux ``G_w`` (``G_nw = -G_w``) and ``dG_w/dS``."""
    psi, dpsi = buoyancy_psi(st, mob, want_jac)
    G = st.coef * psi
    dG = st.coef[..., None] * dpsi if want_jac else None
    return G, dG


# ---------------------------------------------------------------------------
# total velocity and two-point reference fluxes


def gamma_coefficient(dz, model, c_gamma=1.0, delta=1e-9):
    """Steepness of the mobility blending: ``c_gamma / (g |drho| |dz| + delta)``."""
    scale = model.g * abs(model.rho_w - model.rho_nw) * np.abs(dz)
    return c_gamma / (scale + delta)


def total_velocity(T, dp, dz, S_k, S_k1, model, gamma):
    """Total velocity with arctan-blended (weighted-average) mobilities.

    Returns ``(uT, duT_ddp, duT_dSk, duT_dSk1)`` where ``dp = p_k - p_k1``.
    """
    rgw, rgn = model.rho_g
    ma = mobilities(model, S_k)
    mb = mobilities(model, S_k1)
    dphi_w = dp + rgw * dz
    dphi_n = dp + rgn * dz
    dphi = dp + 0.5 * (rgw + rgn) * dz
    gx = gamma * dphi
    beta = 0.5 + np.arctan(gx) / np.pi
    dbeta = gamma / (np.pi * (1.0 + gx * gx))
    a_k = ma.lam_w * dphi_w + ma.lam_nw * dphi_n
    a_k1 = mb.lam_w * dphi_w + mb.lam_nw * dphi_n
    uT = T * (beta * a_k + (1.0 - beta) * a_k1)
    d_dp = T * (dbeta * (a_k - a_k1) + beta * ma.lam_T + (1.0 - beta) * mb.lam_T)
    d_Sk = T * beta * (ma.dlam_w_dS * dphi_w + ma.dlam_nw_dS * dphi_n)
    d_Sk1 = T * (1.0 - beta) * (mb.dlam_w_dS * dphi_w + mb.dlam_nw_dS * dphi_n)
    return uT, d_dp, d_Sk, d_Sk1


def ppu_flux(T, dp, dz, S_k, S_k1, model):
    """Two-point phase-potential upwind fluxes ``(F_w, F_nw)``."""
    rgw, rgn = model.rho_g
    ma = mobilities(model, S_k)
    mb = mobilities(model, S_k1)
    dphi_w = dp + rgw * dz
    dphi_n = dp + rgn * dz
    lw = np.where(dphi_w >= 0, ma.lam_w, mb.lam_w)
    ln = np.where(dphi_n >= 0, ma.lam_nw, mb.lam_nw)
    return T * lw * dphi_w, T * ln * dphi_n


def ihu_two_point(T, uT, dz, S_k, S_k1, model):
    """Two-point IHU fluxes ``(F_w, F_nw)`` for a given total velocity."""
    ma = mobilities(model, S_k)
    mb = mobilities(model, S_k1)
    chi_a = ma.lam_w / ma.lam_T
    chi_b = mb.lam_w / mb.lam_T
    V_w = np.where(uT >= 0, chi_a, chi_b) * uT
    drho = model.rho_w - model.rho_nw
    w_first = drho * dz > 0
    la = np.where(w_first, ma.lam_w, ma.lam_nw)
    lb = np.where(w_first, mb.lam_nw, mb.lam_w)
    h, _, _ = harmonic_pair(la, lb)
    G_w = T * h * drho * model.g * dz
    F_w = V_w + G_w
    return F_w, uT - V_w - G_w


# ---------------------------------------------------------------------------
# region fluxes


@dataclass
class FluxEvaluation:
    """Half-interface fluxes of a batch of regions with local derivatives."""

    F_w: np.ndarray
    F_nw: np.ndarray
    uT: np.ndarray
    dF_w: np.ndarray | None = None
    duT: np.ndarray | None = None
    V_w: np.ndarray | None = None
    G_w: np.ndarray | None = None
    chi_bar_w: np.ndarray | None = None
    chi_bar_nw: np.ndarray | None = None
    C: np.ndarray | None = None

    @property
    def dF_nw(self):
        return None if self.dF_w is None else self.duT - self.dF_w


def _pressure_jac(coef):
    # d(coef * (p_k - p_k1)) w.r.t. local [p_0..p_3, S_0..S_3]
    out = np.zeros(np.shape(coef) + (8,))
    out[..., :4] = coef[..., None] * (_EYE - _NEXT)
    return out


def ihu_fluxes_given_ut(cfg, T, dz, model, uT, S, duT=None, stencil=None, want_jac=True):
    """IHU phase fluxes for prescribed total velocities ``uT`` (shape (R, 4)).

    ``duT`` are the derivatives of ``uT`` w.r.t. the local unknowns; when omitted
    the total velocity is treated as fixed.
    """
    S = np.asarray(S)
    mob = mobilities(model, S)
    chi_w, chi_nw, dchi_w, _ = vertex_chi(mob)
    if duT is None:
        duT = np.zeros(np.shape(uT) + (8,))
    avg, davg, A, B, C, _ = upwind_average(
        uT, duT, chi_w, dchi_w, cfg.limiter, cfg.freeze_omega, want_jac
    )
    chi_bar_nw = (C @ chi_nw[..., None])[..., 0]
    if stencil is None:
        stencil = buoyancy_stencil(T, dz, model, cfg.limiter)
    G_w, dG_w = buoyancy_flux(stencil, mob, want_jac)
    V_w = avg * uT
    V_nw = chi_bar_nw * uT
    F_w = V_w + G_w
    F_nw = V_nw - G_w
    dF_w = None
    if want_jac:
        dF_w = davg * uT[..., None] + avg[..., None] * duT
        dF_w[..., 4:] += dG_w
    return FluxEvaluation(F_w, F_nw, uT, dF_w, duT, V_w, G_w, avg, chi_bar_nw, C)


def region_fluxes(cfg, T, dz, model, p, S, stencil=None, want_jac=True):
    """Fluxes at the four half interfaces of each region from local ``p``, ``S``.

    ``T``, ``dz``, ``p`` and ``S`` all have shape ``(R, 4)``.
    """
    p = np.asarray(p)
    S = np.asarray(S)
    dp = p - np.roll(p, -1, axis=-1)
    S_k1 = np.roll(S, -1, axis=-1)
    if cfg.is_ihu:
        gamma = gamma_coefficient(dz, model, cfg.c_gamma, cfg.gamma_delta)
        uT, d_dp, d_Sk, d_Sk1 = total_velocity(T, dp, dz, S, S_k1, model, gamma)
        duT = None
        if want_jac:
            duT = _pressure_jac(d_dp)
            duT[..., 4:] = d_Sk[..., None] * _EYE + d_Sk1[..., None] * _NEXT
        return ihu_fluxes_given_ut(cfg, T, dz, model, uT, S, duT, stencil, want_jac)
    return ppu_fluxes(cfg, T, dz, model, dp, S, want_jac)


def ppu_fluxes(cfg, T, dz, model, dp, S, want_jac=True):
    """Phase-potential upwinding; MultiD when the limiter is not ``ZERO``.

    Each phase has its own coupling system driven by its potential flux
    ``T (dp + rho g dz)``, applied to the vertex mobilities.
    """
    mob = mobilities(model, S)
    rgw, rgn = model.rho_g
    out = []
    for rg, lam, dlam in ((rgw, mob.lam_w, mob.dlam_w_dS), (rgn, mob.lam_nw, mob.dlam_nw_dS)):
        v = T * (dp + rg * dz)
        dv = _pressure_jac(T) if want_jac else None
        avg, davg, *_ = upwind_average(v, dv, lam, dlam, cfg.limiter, cfg.freeze_omega, want_jac)
        F = avg * v
        dF = davg * v[..., None] + avg[..., None] * dv if want_jac else None
        out.append((F, dF))
    (F_w, dF_w), (F_nw, dF_nw) = out
    uT = F_w + F_nw
    duT = dF_w + dF_nw if want_jac else None
    return FluxEvaluation(F_w, F_nw, uT, dF_w, duT)
