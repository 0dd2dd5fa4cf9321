"""Executable checks of the discrete properties the schemes are built on.

Every check returns a :class:`CheckReport`.  Samplers are seeded and the seed
is stored in the report, so a failing sample can be replayed.

Sign checks (monotonicity) use complex-step derivatives: they are exact to
rounding, whereas central differences carry O(1e-9) cancellation noise that
would swamp the 1e-10 sign tolerance.  The Jacobian check deliberately uses
central differences, since it validates the analytic derivative chain
against an independent oracle.
"""

import csv
import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .fluid import FluidModel, mobilities, vertex_chi
from .flux import (
    SchemeConfig,
    buoyancy_flux,
    buoyancy_stencil,
    harmonic_pair,
    ihu_fluxes_given_ut,
    ihu_two_point,
    limiter_eval,
    omega_gravity,
    omega_viscous,
    region_fluxes,
    viscous_coupling,
)

SIGN_TOL = 1e-10
IDENTITY_TOL = 1e-12
JAC_TOL = 1e-6
CS_STEP = 1e-30


@dataclass
class CheckReport:
    name: str
    samples: int
    worst: float
    tol: float
    passed: bool
    seed: int | None = None
    offending: dict | None = None
    details: dict = field(default_factory=dict)

    def row(self):
        return {
            "check": self.name,
            "samples": self.samples,
            "worst": f"{self.worst:.3e}",
            "tol": f"{self.tol:.1e}",
            "pass": int(self.passed),
            "seed": "" if self.seed is None else self.seed,
            "offending": "" if self.offending is None else json.dumps(self.offending),
        }


def _report(name, samples, violations, tol, seed=None, sample_of=None, details=None):
    """Build a report from an array of violation magnitudes (<= tol passes)."""
    violations = np.asarray(violations, dtype=float).ravel()
    worst = float(np.max(violations)) if violations.size else 0.0
    passed = bool(worst <= tol)
    offending = None
    if not passed and sample_of is not None:
        offending = sample_of(int(np.argmax(violations)))
    return CheckReport(name, samples, worst, tol, passed, seed, offending, details or {})


def _tolist(d):
    return {k: np.asarray(v).tolist() for k, v in d.items()}


# ---------------------------------------------------------------------------
# random region sampler


SIGN_PATTERNS = np.array(list(itertools.product((-1.0, 1.0), repeat=4)))


def stratified_ut(rng, n):
    """Total velocities cycling through all 16 sign patterns, |u| in (0.01, 1]."""
    mag = rng.uniform(0.01, 1.0, (n, 4))
    signs = SIGN_PATTERNS[np.arange(n) % 16]
    return mag * signs


def planar_dz(rng, n):
    """Depth differences of a planar depth field on a Cartesian region.

    ``dz = (a, b, -a, -b)``; a quarter of the samples have ``a = 0`` or ``b = 0``
    (horizontal interfaces), the rest cover both sign configurations.
    """
    a = rng.uniform(-1.0, 1.0, n)
    b = rng.uniform(-1.0, 1.0, n)
    kind = np.arange(n) % 8
    a = np.where(kind == 6, 0.0, a)
    b = np.where(kind == 7, 0.0, b)
    return np.stack([a, b, -a, -b], axis=1)


@dataclass
class RegionSample:
    T: np.ndarray
    dz: np.ndarray
    uT: np.ndarray
    p: np.ndarray
    S: np.ndarray

    def pick(self, i):
        return _tolist({k: getattr(self, k)[i] for k in ("T", "dz", "uT", "p", "S")})


def sample_regions(n, seed=0):
    rng = np.random.default_rng(seed)
    T = rng.uniform(0.1, 2.0, (n, 4))
    dz = planar_dz(rng, n)
    uT = stratified_ut(rng, n)
    p = rng.uniform(-1.0, 1.0, (n, 4))
    S = rng.uniform(0.0, 1.0, (n, 4))
    return RegionSample(T, dz, uT, p, S)


# ---------------------------------------------------------------------------
# flux kernels at fixed total velocity / fixed pressure


def ihu_kernel(cfg, model):
    """``(T, dz, uT, p, S) -> (F_w, F_nw)`` for an IHU scheme at fixed uT."""

    def kernel(T, dz, uT, p, S):
        ev = ihu_fluxes_given_ut(cfg, T, dz, model, uT, S, want_jac=False)
        return ev.F_w, ev.F_nw

    return kernel


def ppu_kernel(cfg, model):
    """PPU phase fluxes at fixed pressures (the upwind directions are fixed too)."""

    def kernel(T, dz, uT, p, S):
        ev = region_fluxes(cfg, T, dz, model, p, S, want_jac=False)
        return ev.F_w, ev.F_nw

    return kernel


def flipped_omega_kernel(cfg, model):
    """Negative control: viscous weights enter with the wrong sign."""

    def kernel(T, dz, uT, p, S):
        mob = mobilities(model, S)
        chi_w, chi_nw, _, _ = vertex_chi(mob)
        omega, _ = omega_viscous(uT, cfg.limiter)
        A, B = viscous_coupling(uT, -omega)
        C = np.linalg.solve(A, B)
        V_w = (C @ chi_w[..., None])[..., 0] * uT
        V_nw = (C @ chi_nw[..., None])[..., 0] * uT
        G, _ = buoyancy_flux(buoyancy_stencil(T, dz, model, cfg.limiter), mob, want_jac=False)
        return V_w + G, V_nw - G

    return kernel


def scheme_kernel(cfg, model):
    return ihu_kernel(cfg, model) if cfg.is_ihu else ppu_kernel(cfg, model)


def _net_outflow(F):
    # vertex k: +F[k] (towards k+1) - F[k-1] (from k-1)
    return F - np.roll(F, 1, axis=-1)


def saturation_sensitivities(kernel, smp):
    """Complex-step derivatives of vertex net outflows w.r.t. each S_j.

    Returns ``(dW, dN)`` of shape (n, 4 vertices, 4 saturations) for the
    wetting and nonwetting net outflows with respect to the wetting
    saturation.
    """
    n = smp.S.shape[0]
    dW = np.empty((n, 4, 4))
    dN = np.empty((n, 4, 4))
    for j in range(4):
        S = smp.S.astype(complex)
        S[:, j] += 1j * CS_STEP
        Fw, Fn = kernel(smp.T, smp.dz, smp.uT, smp.p, S)
        dW[:, :, j] = _net_outflow(np.imag(Fw)) / CS_STEP
        dN[:, :, j] = _net_outflow(np.imag(Fn)) / CS_STEP
    return dW, dN


def monotonicity_scan(cfg=None, n_samples=100_000, seed=0, model=None, kernel=None, tol=SIGN_TOL):
    """Monotonicity of the net outflow of every vertex.

    For phase l and vertex k: d(out_l,k)/dS_l,j <= 0 for j != k and
    d(out_l,k)/dS_l,k >= 0, where S_nw = 1 - S.  IHU schemes are scanned at
    fixed total velocity; PPU schemes at fixed pressure.
    """
    cfg = cfg or SchemeConfig()
    model = model or FluidModel()
    smp = sample_regions(n_samples, seed)
    kernel = kernel or scheme_kernel(cfg, model)
    dW, dN = saturation_sensitivities(kernel, smp)
    # nonwetting saturation is 1 - S
    dN = -dN
    off = ~np.eye(4, dtype=bool)
    viol_off = np.maximum(np.where(off, dW, -np.inf), np.where(off, dN, -np.inf)).max(axis=(1, 2))
    diag_w = np.einsum("nkk->nk", dW)
    diag_n = np.einsum("nkk->nk", dN)
    viol_diag = np.maximum(-diag_w, -diag_n).max(axis=1)
    viol = np.maximum(np.maximum(viol_off, viol_diag), 0.0)
    return _report(
        f"monotonicity[{cfg.scheme}/{cfg.limiter}]",
        n_samples,
        viol,
        tol,
        seed,
        smp.pick,
        {"worst_offdiag": float(np.max(viol_off)), "worst_diag": float(np.max(viol_diag))},
    )


def term_monotonicity(cfg=None, n_samples=100_000, seed=0, model=None, tol=SIGN_TOL):
    """Viscous and buoyancy terms separately (fixed uT); returns two reports."""
    cfg = cfg or SchemeConfig()
    model = model or FluidModel()
    smp = sample_regions(n_samples, seed)

    def viscous(T, dz, uT, p, S):
        ev = ihu_fluxes_given_ut(cfg, T, dz, model, uT, S, want_jac=False)
        return ev.V_w, ev.uT - ev.V_w

    def buoyancy(T, dz, uT, p, S):
        G, _ = buoyancy_flux(buoyancy_stencil(T, dz, model, cfg.limiter), mobilities(model, S), False)
        return G, -G

    out = []
    for name, k in (("viscous", viscous), ("buoyancy", buoyancy)):
        r = monotonicity_scan(cfg, n_samples, seed, model, kernel=k, tol=tol)
        r.name = f"{name}-{r.name}"
        out.append(r)
    return out


# ---------------------------------------------------------------------------
# coupling-matrix properties


def matrix_properties(limiter="SMU4", n_samples=100_000, seed=0, forced_omega=None, tol=IDENTITY_TOL):
    """M-matrix structure of A and the averaging matrix C = A^-1 B.

    Checks strict diagonal dominance of A, A^-1 >= 0 and C >= 0 entrywise
    (explicit 4x4 inverses), and unit row sums of C.
    """
    rng = np.random.default_rng(seed)
    uT = stratified_ut(rng, n_samples)
    omega, _ = omega_viscous(uT, limiter)
    if forced_omega is not None:
        omega = np.full_like(omega, forced_omega)
    A, B = viscous_coupling(uT, omega)
    # singular samples are recorded as violations rather than raised
    singular = np.abs(np.linalg.det(A)) <= 1e-14 * np.abs(A).max(axis=(1, 2)) ** 4
    Ainv = np.linalg.inv(np.where(singular[:, None, None], np.eye(4), A))
    C = Ainv @ B
    diag = np.abs(np.einsum("nkk->nk", A))
    off = np.abs(A).sum(axis=2) - diag
    dom_margin = (diag - off).min(axis=1)  # must be > 0
    v_dom = np.where(dom_margin > 0, 0.0, 1.0 - dom_margin)
    v_inv = np.maximum(-Ainv.min(axis=(1, 2)), 0.0)
    v_C = np.maximum(-C.min(axis=(1, 2)), 0.0)
    v_sum = np.abs(C.sum(axis=2) - 1.0).max(axis=1)
    # dominance is strict (pass/fail); the others are compared to tol
    viol = np.maximum.reduce([np.where((v_dom > 0) | singular, np.inf, 0.0), v_inv, v_C, v_sum])
    return _report(
        f"matrix[{limiter}]",
        n_samples,
        viol,
        tol,
        seed,
        lambda i: _tolist({"uT": uT[i], "omega": omega[i]}),
        {
            "min_dominance_margin": float(dom_margin.min()),
            "min_Ainv": float(Ainv.min()),
            "min_C": float(C.min()),
            "worst_rowsum": float(v_sum.max()),
            "singular": int(singular.sum()),
        },
    )


# ---------------------------------------------------------------------------
# algebraic identities


def consistency_identities(n_samples=100_000, seed=0, model=None, limiter="SMU4", tol=IDENTITY_TOL):
    """``sum_l V_l = uT`` and ``G_w = -G_nw`` at every half interface.

    Both are measured relative to the interface flux scale.
    """
    model = model or FluidModel()
    cfg = SchemeConfig("MULTID_IHU", limiter)
    smp = sample_regions(n_samples, seed)
    ev = ihu_fluxes_given_ut(cfg, smp.T, smp.dz, model, smp.uT, smp.S, want_jac=False)
    V_nw = ev.chi_bar_nw * ev.uT
    scale = np.maximum(np.abs(ev.uT), 1e-300)
    v_visc = (np.abs(ev.V_w + V_nw - ev.uT) / scale).max(axis=1)
    # G_nw is built independently from the nonwetting point of view
    G_nw = _buoyancy_nw_oracle(smp, model, cfg.limiter)
    gscale = np.maximum(np.abs(ev.G_w), 1e-300)
    v_buoy = np.where(np.abs(ev.G_w) > 0, np.abs(ev.G_w + G_nw) / gscale, np.abs(G_nw)).max(axis=1)
    viol = np.maximum(v_visc, v_buoy)
    return _report(
        "consistency[sumV=uT, Gw=-Gnw]",
        n_samples,
        viol,
        tol,
        seed,
        smp.pick,
        {"worst_viscous": float(v_visc.max()), "worst_buoyancy": float(v_buoy.max())},
    )


def _buoyancy_nw_oracle(smp, model, limiter):
    """Nonwetting buoyancy flux written out interface by interface."""
    mob = mobilities(model, smp.S)
    lam = {"w": mob.lam_w, "nw": mob.lam_nw}
    rho = {"w": model.rho_w, "nw": model.rho_nw}
    omega, branch = omega_gravity(smp.T, smp.dz, limiter)
    n = smp.S.shape[0]
    rows = np.arange(n)
    G = np.zeros((n, 4))
    for k in range(4):
        dz = smp.dz[:, k]
        # phase moving from k to k+1 under buoyancy is the heavier one if dz > 0
        nw_down = (rho["nw"] - rho["w"]) * dz > 0
        first = np.where(nw_down, "nw", "w")
        a_lam = lambda v: np.where(first == "nw", lam["nw"][rows, v], lam["w"][rows, v])  # noqa: E731
        b_lam = lambda v: np.where(first == "nw", lam["w"][rows, v], lam["nw"][rows, v])  # noqa: E731
        kp1, kp2, km1 = (k + 1) % 4, (k + 2) % 4, (k - 1) % 4
        h0, _, _ = harmonic_pair(a_lam(np.full(n, k)), b_lam(np.full(n, kp1)))
        h_next, _, _ = harmonic_pair(a_lam(np.full(n, k)), b_lam(np.full(n, kp2)))
        h_prev, _, _ = harmonic_pair(a_lam(np.full(n, km1)), b_lam(np.full(n, kp1)))
        h1 = np.where(branch[:, k] == 1, h_next, np.where(branch[:, k] == 2, h_prev, 0.0))
        psi = (1 - omega[:, k]) * h0 + omega[:, k] * h1
        G[:, k] = smp.T[:, k] * psi * (rho["nw"] - rho["w"]) * model.g * dz
    return G


def smu4_symmetry(n_samples=10_000, seed=0, tol=1e-14):
    """``phi(1/r) = phi(r) / r`` for the SMU4 limiter on log-uniform ratios."""
    rng = np.random.default_rng(seed)
    r = 10.0 ** rng.uniform(-4, 4, n_samples)
    a, _ = limiter_eval("SMU4", 1.0 / r)
    b, _ = limiter_eval("SMU4", r)
    viol = np.abs(a - b / r) / np.maximum(np.abs(a), 1e-300)
    return _report("smu4-symmetry", n_samples, viol, tol, seed, lambda i: {"r": float(r[i])})


def gravity_weight_cancellation(n_samples=10_000, seed=0, limiter="SMU4", tol=IDENTITY_TOL):
    """Paired buoyancy weights balance: T w dz is equal on the two coupled interfaces."""
    rng = np.random.default_rng(seed)
    T = rng.uniform(0.1, 2.0, (n_samples, 4))
    dz = planar_dz(rng, n_samples)
    omega, branch = omega_gravity(T, dz, limiter)
    k = np.arange(4)
    partner = np.where(branch == 1, (k + 1) % 4, (k - 1) % 4)
    w = T * omega * dz
    w_partner = np.take_along_axis(w, partner, axis=1)
    scale = np.maximum(np.abs(T * dz), 1e-300)
    viol = np.where(branch > 0, np.abs(w - w_partner) / scale, 0.0).max(axis=1)
    return _report(f"gravity-weight-cancellation[{limiter}]", n_samples, viol, tol, seed)


def scheme_identity(n_samples=10_000, seed=0, model=None, tol=1e-14):
    """Region IHU with the ZERO limiter against the two-point IHU formula.

    Uses random total velocities; compares each half interface (relative to
    the local flux scale).
    """
    model = model or FluidModel()
    rng = np.random.default_rng(seed)
    n_reg = (n_samples + 3) // 4
    T = rng.uniform(0.1, 2.0, (n_reg, 4))
    dz = rng.uniform(-1.0, 1.0, (n_reg, 4))
    uT = rng.uniform(-1.0, 1.0, (n_reg, 4))
    S = rng.uniform(0.0, 1.0, (n_reg, 4))
    ev = ihu_fluxes_given_ut(SchemeConfig("MULTID_IHU", "ZERO"), T, dz, model, uT, S, want_jac=False)
    Fw, Fn = ihu_two_point(T, uT, dz, S, np.roll(S, -1, axis=1), model)
    scale = np.maximum(np.maximum(np.abs(Fw), np.abs(Fn)), np.abs(uT))
    viol = np.maximum(np.abs(ev.F_w - Fw), np.abs(ev.F_nw - Fn)) / scale
    return _report("scheme-identity[MULTID_IHU/ZERO = IHU_1D]", n_reg * 4, viol, tol, seed)


# ---------------------------------------------------------------------------
# Jacobian


def fd_flux_jacobian(cfg, T, dz, model, p, S, step=1e-7, tol=JAC_TOL, analytic=None):
    """Central-difference check of the local flux Jacobians of a batch of regions.

    Compares d(F_w, uT)/d(p, S) for every region.  The error of a region is
    normwise: ``max |FD - J| / max |J|`` over its 8x8 block, so that columns
    whose entries are tiny compared with the fluxes are not judged on
    finite-difference rounding alone.  Samples near an upwind switch
    (potential or total-velocity magnitudes below ``10 * step`` times the
    flux scale) are skipped.  ``analytic`` may supply a corrupted Jacobian
    for negative controls; the report then locates the worst column.
    """
    ev = region_fluxes(cfg, T, dz, model, p, S, want_jac=True)
    J = np.concatenate([ev.dF_w, ev.duT], axis=1) if analytic is None else analytic
    U = np.concatenate([p, S], axis=1)
    FD = np.empty_like(J)
    for t in range(8):
        Up = U.copy()
        Um = U.copy()
        Up[:, t] += step
        Um[:, t] -= step
        a = region_fluxes(cfg, T, dz, model, Up[:, :4], Up[:, 4:], want_jac=False)
        b = region_fluxes(cfg, T, dz, model, Um[:, :4], Um[:, 4:], want_jac=False)
        FD[:, :, t] = np.concatenate([a.F_w - b.F_w, a.uT - b.uT], axis=1) / (2 * step)
    dev = np.abs(FD - J)
    norm = np.maximum(np.abs(J).max(axis=(1, 2)), 1e-300)
    err = dev.max(axis=(1, 2)) / norm
    keep = _away_from_kinks(cfg, T, dz, model, p, ev, step)
    err = np.where(keep, err, 0.0)
    col_err = np.where(keep[:, None], dev.max(axis=1) / norm[:, None], 0.0)
    return _report(
        f"jacobian[{cfg.scheme}/{cfg.limiter}]",
        int(keep.sum()),
        err,
        tol,
        None,
        lambda i: {"region": i, "column": int(np.argmax(col_err[i]))},
        {"worst_per_column": col_err.max(axis=0).tolist(), "skipped": int((~keep).sum())},
    )


def _away_from_kinks(cfg, T, dz, model, p, ev, step):
    dp = p - np.roll(p, -1, axis=1)
    scale = 10 * step * T * (1 + np.abs(dp).max())
    if cfg.is_ihu:
        return np.all(np.abs(ev.uT) > scale, axis=1)
    rgw, rgn = model.rho_g
    pw = np.abs(dp + rgw * dz)
    pn = np.abs(dp + rgn * dz)
    return np.all(np.minimum(pw, pn) * T > scale, axis=1)


def jacobian_states(n, seed=0):
    """Random region states for the Jacobian check (S kept off the endpoints)."""
    rng = np.random.default_rng(seed)
    T = rng.uniform(0.1, 2.0, (n, 4))
    dz = planar_dz(rng, n)
    p = rng.uniform(-1.0, 1.0, (n, 4))
    S = rng.uniform(0.02, 0.98, (n, 4))
    return T, dz, p, S


def small_grid_system(setup="wells", seed=0, n=4, scheme=None, model=None):
    """A random ``n x n`` tilted, heterogeneous grid with its assembler and a state.

    ``setup`` is ``"closed"`` (pressure anchor), ``"wells"`` (one injector,
    one producer) or ``"dirichlet"`` (fixed-pressure corner cell).
    """
    from .grid import build_dual, build_grid
    from .solver import Assembler, SimState, WellSet, well_index

    rng = np.random.default_rng(seed)
    model = model or FluidModel()
    perm = rng.uniform(10.0, 500.0, n * n)
    gx, gy = rng.uniform(-1.0, 1.0, 2)
    grid = build_grid(n, n, (0.0, 10.0, 0.0, 10.0), perm, 0.2, lambda x, y: gx * x + gy * y)
    dual = build_dual(grid)
    last = n * n - 1
    if setup == "closed":
        wells = WellSet()
    elif setup == "wells":
        wells = WellSet(injectors=[(0, 5.0)], producers=[(last, -50.0, well_index(dual, last))])
    elif setup == "dirichlet":
        wells = WellSet(injectors=[(0, 5.0)], dirichlet=[(last, 0.0)])
    else:
        raise ValueError(f"unknown setup {setup!r}")
    asm = Assembler(dual, model, scheme or SchemeConfig(), wells)
    state = SimState(rng.uniform(0.0, 20.0, n * n), rng.uniform(0.05, 0.95, n * n))
    old = SimState(state.p.copy(), np.clip(state.S + rng.uniform(-0.05, 0.05, n * n), 0.0, 1.0))
    return asm, state, old


def assembled_jacobian_check(cfg, setups=("closed", "wells", "dirichlet"), n_states=10, seed=0, dt=0.1,
                             step=1e-6, tol=JAC_TOL):
    """Central-difference check of the full sparse Jacobian on 4x4 grids.

    The error of a state is ``max |FD - J| / max |J|`` over the whole matrix.
    """
    from .solver import SimState

    errs = []
    for k, setup in enumerate(setups):
        for i in range(n_states):
            asm, state, old = small_grid_system(setup, seed + 1000 * k + i, scheme=cfg)
            _, J, _ = asm.assemble(state, old, dt)
            J = J.toarray()
            U = state.to_vector()
            FD = np.empty_like(J)
            for t in range(U.size):
                h = step * max(1.0, abs(U[t]))
                Up, Um = U.copy(), U.copy()
                Up[t] += h
                Um[t] -= h
                Rp, _, _ = asm.assemble(SimState.from_vector(Up), old, dt, want_jac=False)
                Rm, _, _ = asm.assemble(SimState.from_vector(Um), old, dt, want_jac=False)
                FD[:, t] = (Rp - Rm) / (2 * h)
            errs.append(np.abs(FD - J).max() / np.abs(J).max())
    errs = np.array(errs)
    return _report(
        f"assembled-jacobian[{cfg.scheme}]",
        errs.size,
        errs,
        tol,
        seed,
        lambda j: {"setup": setups[j // n_states], "seed": seed + 1000 * (j // n_states) + j % n_states},
    )


# ---------------------------------------------------------------------------
# trajectories


def bounds_and_mass(grid, traj, tol_bounds=1e-9, tol_mass=1e-8):
    """Saturation bounds at every stored state and the global wetting balance."""
    from .solver import mass_balance_error

    S = np.array([s.S for s in traj.states])
    below = float(max(0.0, -S.min()))
    above = float(max(0.0, S.max() - 1.0))
    v_bounds = max(below, above)
    mb = mass_balance_error(grid, traj)
    passed = v_bounds <= tol_bounds and mb <= tol_mass
    return CheckReport(
        "bounds-and-mass",
        S.size,
        max(v_bounds / tol_bounds, mb / tol_mass) * min(tol_bounds, tol_mass),
        min(tol_bounds, tol_mass),
        bool(passed),
        details={"bound_violation": v_bounds, "mass_balance": mb, "S_min": float(S.min()), "S_max": float(S.max())},
    )


# ---------------------------------------------------------------------------
# suite


def run_suite(n_samples=100_000, seed=0, model=None):
    model = model or FluidModel()
    reports = []
    for scheme in ("PPU_1D", "IHU_1D", "MULTID_PPU", "MULTID_IHU"):
        reports.append(monotonicity_scan(SchemeConfig(scheme), n_samples, seed, model))
    reports.extend(term_monotonicity(SchemeConfig("MULTID_IHU"), n_samples, seed, model))
    for lim in ("ZERO", "SMU", "SMU4"):
        reports.append(matrix_properties(lim, n_samples, seed))
    reports.append(consistency_identities(n_samples, seed, model))
    reports.append(smu4_symmetry(10_000, seed))
    reports.append(gravity_weight_cancellation(10_000, seed))
    reports.append(scheme_identity(10_000, seed, model))
    T, dz, p, S = jacobian_states(2000, seed)
    for scheme in ("PPU_1D", "IHU_1D", "MULTID_PPU", "MULTID_IHU"):
        reports.append(fd_flux_jacobian(SchemeConfig(scheme, freeze_omega=False), T, dz, model, p, S))
    for scheme in ("PPU_1D", "IHU_1D", "MULTID_PPU", "MULTID_IHU"):
        reports.append(assembled_jacobian_check(SchemeConfig(scheme, freeze_omega=False), seed=seed))
    return reports


def write_reports_csv(reports, path):
    rows = [r.row() for r in reports]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()) if rows else ["check"])
        w.writeheader()
        w.writerows(rows)


def format_summary(reports):
    width = max(len(r.name) for r in reports) if reports else 10
    lines = [f"{'check':<{width}}  {'samples':>8}  {'worst':>10}  {'tol':>8}  result"]
    for r in reports:
        lines.append(
            f"{r.name:<{width}}  {r.samples:>8d}  {r.worst:>10.3e}  {r.tol:>8.1e}  {'PASS' if r.passed else 'FAIL'}"
        )
    n_fail = sum(not r.passed for r in reports)
    lines.append(f"{len(reports) - n_fail}/{len(reports)} checks passed")
    return "\n".join(lines)


def reports_to_json(reports):
    return [asdict(r) for r in reports]
