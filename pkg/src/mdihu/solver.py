"""Fully implicit assembly and damped Newton time stepping.

Unknowns are interleaved per cell, ``U = [p_0, S_0, p_1, S_1, ...]``, and so
are the equations: row ``2c`` is the total (pressure) equation of cell ``c``
and row ``2c + 1`` its wetting-phase transport equation::

    R_tot = dt * (sum of outgoing total fluxes - q_T)
    R_w   = PV * (S - S_old) + dt * (sum of outgoing wetting fluxes - q_w)

with well rates ``q`` in ft^3/day (positive = injection).  The nonwetting
residual is ``R_tot - R_w``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .fluid import mobilities, vertex_chi
from .flux import SchemeConfig, buoyancy_stencil, region_fluxes


class NewtonFailure(RuntimeError):
    pass


class SingularJacobianError(RuntimeError):
    pass


class SolverAbort(RuntimeError):
    """Time step fell below the floor after repeated chopping."""


@dataclass
class SimState:
    p: np.ndarray
    S: np.ndarray

    @classmethod
    def from_vector(cls, U):
        return cls(U[0::2].copy(), U[1::2].copy())

    def to_vector(self):
        U = np.empty(2 * self.p.size)
        U[0::2] = self.p
        U[1::2] = self.S
        return U

    def copy(self):
        return SimState(self.p.copy(), self.S.copy())


@dataclass(frozen=True)
class NewtonConfig:
    max_iters: int = 50
    dS_max: float = 0.2
    tol: float = 1e-8
    chop_factor: float = 0.5
    min_dt_fraction: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1 or self.tol <= 0 or not 0 < self.dS_max <= 1:
            raise ValueError("invalid Newton configuration")
        if not 0 < self.chop_factor < 1:
            raise ValueError("chop_factor must be in (0, 1)")


@dataclass
class WellSet:
    """Source terms.

    ``injectors``: list of ``(cell, rate)`` with wetting-phase rate in ft^3/day.
    ``producers``: list of ``(cell, p_bhp, WI)``; WI in ft^3/(day psi cP^-1).
    ``dirichlet``: list of ``(cell, p_fixed)``.
    """

    injectors: list = field(default_factory=list)
    producers: list = field(default_factory=list)
    dirichlet: list = field(default_factory=list)

    def __post_init__(self):
        for _, q in self.injectors:
            if q < 0:
                raise ValueError("injection rates must be nonnegative")

    @property
    def injection_rate(self):
        return float(sum(q for _, q in self.injectors))


def well_index(dual, cell, factor=1e3):
    """``factor`` times the largest transmissibility touching ``cell``."""
    mask = dual.cells == cell
    T = np.concatenate([dual.half_T[mask], dual.half_T[np.roll(mask, -1, axis=1)]])
    return factor * float(T.max()) if T.size else factor


class Assembler:
    """Residual and Jacobian of one time step for a fixed grid, scheme and wells."""

    def __init__(self, dual, model, scheme=None, wells=None, anchor=None):
        self.dual = dual
        self.grid = dual.grid
        self.model = model
        self.scheme = scheme or SchemeConfig()
        self.wells = wells or WellSet()
        n = self.grid.n_cells
        self.n = n
        self.pv = self.grid.pore_volume
        self.stencil = None
        if self.scheme.is_ihu:
            self.stencil = buoyancy_stencil(dual.half_T, dual.half_dz, model, self.scheme.limiter)
        # closed systems need one pressure equation replaced by p = p_ref
        if anchor is None and not self.wells.producers and not self.wells.dirichlet:
            anchor = (n // 2, 0.0)
        self.anchor = anchor
        self.dirichlet_cells = np.array([c for c, _ in self.wells.dirichlet], dtype=int)
        self.dirichlet_p = np.array([p for _, p in self.wells.dirichlet], dtype=float)
        # geometric scale for constraint rows (sum of touching transmissibilities)
        touch = np.concatenate([dual.cells.ravel(), np.roll(dual.cells, -1, axis=1).ravel()])
        self.cell_T = np.bincount(touch, weights=np.tile(dual.half_T.ravel(), 2), minlength=n)
        self.cell_T[self.cell_T == 0] = 1.0
        self._build_pattern()

    # -- sparsity ----------------------------------------------------------
    def _build_pattern(self):
        cells = self.dual.cells
        R = cells.shape[0]
        # region block: rows (eq e, vertex v), cols (local unknown t)
        eq_rows = 2 * cells[:, :, None] + np.array([0, 1])[None, None, :]  # (R,4,2)
        loc_cols = np.concatenate([2 * cells, 2 * cells + 1], axis=1)  # (R,8)
        rows = np.broadcast_to(eq_rows[:, :, :, None], (R, 4, 2, 8))
        cols = np.broadcast_to(loc_cols[:, None, None, :], (R, 4, 2, 8))
        diag = np.arange(self.n)
        # per-cell 2x2 block for accumulation, wells, Dirichlet and anchor rows
        brow = 2 * diag[:, None] + np.array([0, 0, 1, 1])
        bcol = 2 * diag[:, None] + np.array([0, 1, 0, 1])
        all_rows = np.concatenate([rows.ravel(), brow.ravel()])
        all_cols = np.concatenate([cols.ravel(), bcol.ravel()])
        N = 2 * self.n
        keys = all_rows.astype(np.int64) * N + all_cols
        uniq, inv = np.unique(keys, return_inverse=True)
        self._inv = inv
        self._nnz = uniq.size
        r = (uniq // N).astype(np.int64)
        self._indices = (uniq % N).astype(np.int32)
        self._indptr = np.concatenate([[0], np.cumsum(np.bincount(r, minlength=N))]).astype(np.int32)
        self._n_region_entries = rows.size

    # -- evaluation --------------------------------------------------------
    def fluxes(self, state, want_jac=True):
        cells = self.dual.cells
        return region_fluxes(
            self.scheme,
            self.dual.half_T,
            self.dual.half_dz,
            self.model,
            state.p[cells],
            state.S[cells],
            self.stencil,
            want_jac,
        )

    def well_rates(self, state):
        """Per-cell source rates ``(q_w, q_nw, dq/dp, dq/dS)`` in ft^3/day."""
        n = self.n
        qw = np.zeros(n)
        qn = np.zeros(n)
        dqw = np.zeros((n, 2))
        dqn = np.zeros((n, 2))
        for c, rate in self.wells.injectors:
            qw[c] += rate
        if self.wells.producers:
            idx = np.array([c for c, _, _ in self.wells.producers])
            bhp = np.array([b for _, b, _ in self.wells.producers])
            wi = np.array([w for _, _, w in self.wells.producers])
            mob = mobilities(self.model, state.S[idx])
            dpw = state.p[idx] - bhp
            on = dpw >= 0
            drive = np.where(on, dpw, 0.0)
            np.add.at(qw, idx, -wi * mob.lam_w * drive)
            np.add.at(qn, idx, -wi * mob.lam_nw * drive)
            np.add.at(dqw[:, 0], idx, -wi * mob.lam_w * on)
            np.add.at(dqn[:, 0], idx, -wi * mob.lam_nw * on)
            np.add.at(dqw[:, 1], idx, -wi * mob.dlam_w_dS * drive)
            np.add.at(dqn[:, 1], idx, -wi * mob.dlam_nw_dS * drive)
        return qw, qn, dqw, dqn

    def residual_parts(self, state, old, dt, want_jac=True):
        """Standard (unmodified) residual rows and their Jacobian entries."""
        n = self.n
        cells = self.dual.cells
        ev = self.fluxes(state, want_jac)
        out_w = ev.F_w - np.roll(ev.F_w, 1, axis=1)
        out_T = ev.uT - np.roll(ev.uT, 1, axis=1)
        qw, qn, dqw, dqn = self.well_rates(state)
        flat = cells.ravel()
        sum_w = np.bincount(flat, weights=out_w.ravel(), minlength=n)
        sum_T = np.bincount(flat, weights=out_T.ravel(), minlength=n)
        R_tot = dt * (sum_T - qw - qn)
        R_w = self.pv * (state.S - old.S) + dt * (sum_w - qw)
        jac = None
        if want_jac:
            d_out_w = ev.dF_w - np.roll(ev.dF_w, 1, axis=1)
            d_out_T = ev.duT - np.roll(ev.duT, 1, axis=1)
            region_vals = dt * np.stack([d_out_T, d_out_w], axis=2)  # (R,4,2,8)
            block = np.zeros((n, 4))  # [tot/p, tot/S, w/p, w/S]
            block[:, 0] = -dt * (dqw[:, 0] + dqn[:, 0])
            block[:, 1] = -dt * (dqw[:, 1] + dqn[:, 1])
            block[:, 2] = -dt * dqw[:, 0]
            block[:, 3] = self.pv - dt * dqw[:, 1]
            jac = (region_vals, block)
        return R_tot, R_w, jac, ev, (qw, qn)

    def _csr(self, region_vals, block):
        vals = np.concatenate([region_vals.ravel(), block.ravel()])
        data = np.bincount(self._inv, weights=vals, minlength=self._nnz)
        N = 2 * self.n
        return sp.csr_matrix((data, self._indices, self._indptr), shape=(N, N))

    def assemble(self, state, old, dt, want_jac=True):
        """Return ``(R, J, info)`` of the (modified) system solved by Newton.

        ``info`` carries the standard rows used by the convergence test and the
        mass balance.
        """
        R_tot, R_w, jac, ev, q = self.residual_parts(state, old, dt, want_jac)
        R = np.empty(2 * self.n)
        R[0::2] = R_tot
        R[1::2] = R_w
        J = self._csr(*jac) if want_jac else None
        info = {"R_tot": R_tot, "R_w": R_w, "fluxes": ev, "q": q, "dirichlet_w": None}
        if self.dirichlet_cells.size:
            R, J, info = self._apply_dirichlet(state, R, J, info, dt)
        if self.anchor is not None:
            c, pref = self.anchor
            scale = dt * self.cell_T[c]
            R[2 * c] = scale * (state.p[c] - pref)
            if J is not None:
                J = self._replace_row(J, 2 * c, {2 * c: scale})
        return R, J, info

    @staticmethod
    def _replace_row(J, row, entries):
        start, end = J.indptr[row], J.indptr[row + 1]
        cols = J.indices[start:end]
        J.data[start:end] = [entries.get(int(col), 0.0) for col in cols]
        return J

    def _apply_dirichlet(self, state, R, J, info, dt):
        """Fixed-pressure cells: ``p = p_fix``; transport balances the implicit source.

        The cell supplies (or removes) whatever total rate the pressure
        constraint implies, at its own mobility ratio.  The wetting equation
        becomes ``R_w - chi_w(S) R_tot`` so inflow leaves the cell composition
        untouched while outflow carries the cell's fractional flow.
        """
        cs = self.dirichlet_cells
        mob = mobilities(self.model, state.S[cs])
        chi_w, _, dchi_w, _ = vertex_chi(mob)
        R_tot_std = info["R_tot"][cs].copy()
        scale = dt * self.cell_T[cs]
        info["dirichlet_w"] = (cs, chi_w * R_tot_std)
        if J is not None:
            for i, c in enumerate(cs):
                rp, rw = 2 * c, 2 * c + 1
                sp_, ep = J.indptr[rp], J.indptr[rp + 1]
                sw, ew = J.indptr[rw], J.indptr[rw + 1]
                # both rows share the same column pattern by construction
                tot_row = J.data[sp_:ep].copy()
                J.data[sw:ew] -= chi_w[i] * tot_row
                J.data[sw:ew][J.indices[sw:ew] == rw] -= dchi_w[i] * R_tot_std[i]
                J.data[sp_:ep] = np.where(J.indices[sp_:ep] == rp, scale[i], 0.0)
        R[2 * cs] = scale * (state.p[cs] - self.dirichlet_p)
        R[2 * cs + 1] -= chi_w * R_tot_std
        return R, J, info

    def residual_norms(self, state, info):
        """Normalized per-cell residuals ``(|R_w|, |R_nw|) / PV``."""
        R_tot, R_w = info["R_tot"].copy(), info["R_w"].copy()
        if info["dirichlet_w"] is not None:
            cs, src = info["dirichlet_w"]
            R_w[cs] -= src
            R_tot[cs] = 0.0
        if self.anchor is not None:
            # the anchored total equation is implied by all the others
            R_tot[self.anchor[0]] = R_w[self.anchor[0]]
        rw = np.abs(R_w) / self.pv
        rn = np.abs(R_tot - R_w) / self.pv
        return rw, rn


# ---------------------------------------------------------------------------
# linear solve


def linear_solve(J, rhs):
    """Direct sparse LU solve (SuperLU with a symmetric minimum-degree ordering)."""
    J = sp.csc_matrix(J)
    try:
        lu = splu(J, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SingularJacobianError(str(exc)) from exc
    x = lu.solve(np.asarray(rhs, dtype=float))
    if not np.all(np.isfinite(x)):
        raise SingularJacobianError("non-finite solution")
    return x


def damp_update(dU, dS_max):
    """Scale saturation entries so no cell moves by more than ``dS_max``."""
    dU = dU.copy()
    dS = dU[1::2]
    mag = np.abs(dS)
    tau = np.divide(dS_max, mag, out=np.ones_like(mag), where=mag > dS_max)
    dU[1::2] = dS * tau
    return dU


@dataclass
class NewtonResult:
    state: SimState
    iterations: int
    converged: bool
    residual: float
    info: dict | None = None


def newton_solve(asm, guess, old, dt, cfg=None):
    """Damped Newton on one time step.  ``iterations`` counts linear solves."""
    cfg = cfg or NewtonConfig()
    U = guess.to_vector()
    state = guess.copy()
    res = np.inf
    for it in range(cfg.max_iters + 1):
        R, J, info = asm.assemble(state, old, dt, want_jac=True)
        rw, rn = asm.residual_norms(state, info)
        res = float(max(rw.max(), rn.max()))
        if not np.isfinite(res):
            return NewtonResult(state, it, False, res)
        if res <= cfg.tol:
            return NewtonResult(state, it, True, res, info)
        if it == cfg.max_iters:
            break
        try:
            dU = linear_solve(J, -R)
        except SingularJacobianError:
            return NewtonResult(state, it, False, res)
        U = U + damp_update(dU, cfg.dS_max)
        state = SimState.from_vector(U)
    return NewtonResult(state, cfg.max_iters, False, res)


# ---------------------------------------------------------------------------
# time stepping


@dataclass
class StepRecord:
    step: int
    t: float
    dt: float
    iterations: int
    chops: int
    residual: float


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    log: list = field(default_factory=list)
    # per accepted step: cumulative wetting and total source volumes [ft^3]
    wetting_source: list = field(default_factory=list)
    producer_rates: list = field(default_factory=list)
    flux_snapshots: list = field(default_factory=list)
    aborted: bool = False
    failed_iterations: int = 0

    @property
    def total_iterations(self):
        return int(sum(r.iterations for r in self.log)) + self.failed_iterations

    @property
    def total_chops(self):
        return int(sum(r.chops for r in self.log))

    @property
    def final(self):
        return self.states[-1]


def _step_sources(asm, info, dt):
    """Net wetting volume added during the step (wells and fixed-pressure cells)."""
    qw, _ = info["q"]
    vol = dt * float(qw.sum())
    if info["dirichlet_w"] is not None:
        _, src = info["dirichlet_w"]
        # R_w - src = 0: the fixed-pressure cells act as a wetting source src
        vol += float(src.sum())
    return vol


def advance(
    asm,
    state,
    t_end,
    dt,
    cfg=None,
    keep_states=True,
    keep_every=1,
    flux_hook=None,
    producer_cells=None,
):
    """March from ``t = 0`` to ``t_end`` with nominal step ``dt`` (days).

    On Newton failure the step is retried from the previous state with half
    the step; after a success the step resets to ``dt``.  Aborts (setting
    ``aborted``) once the step would drop below ``min_dt_fraction * dt``.
    ``flux_hook(step, t, fluxes)`` is called after each accepted step.
    """
    cfg = cfg or NewtonConfig()
    traj = Trajectory()
    traj.times.append(0.0)
    traj.states.append(state.copy())
    traj.wetting_source.append(0.0)
    t = 0.0
    cur = state.copy()
    step = 0
    eps = 1e-12 * t_end
    while t < t_end - eps:
        h = min(dt, t_end - t)
        chops = 0
        while True:
            res = newton_solve(asm, cur, cur, h, cfg)
            if res.converged:
                break
            traj.failed_iterations += res.iterations
            chops += 1
            h *= cfg.chop_factor
            if h < cfg.min_dt_fraction * dt:
                traj.aborted = True
                traj.log.append(StepRecord(step + 1, t, h, res.iterations, chops, res.residual))
                return traj
        t += h
        step += 1
        cur = res.state
        traj.log.append(StepRecord(step, t, h, res.iterations, chops, res.residual))
        traj.wetting_source.append(traj.wetting_source[-1] + _step_sources(asm, res.info, h))
        if producer_cells is not None:
            qw, qn = res.info["q"]
            traj.producer_rates.append((t, qw[producer_cells].copy(), qn[producer_cells].copy()))
        if flux_hook is not None:
            flux_hook(step, t, res.info["fluxes"])
        if keep_states and (step % keep_every == 0 or t >= t_end - eps):
            traj.times.append(t)
            traj.states.append(cur.copy())
        elif not keep_states:
            # keep the initial state and the latest one only
            del traj.times[1:], traj.states[1:]
            traj.times.append(t)
            traj.states.append(cur.copy())
    return traj


def wetting_volume(grid, state):
    return float(np.sum(grid.pore_volume * state.S))


def mass_balance_error(grid, traj):
    """Relative mismatch between the wetting-volume change and the sources.

    Uses the initial and final stored states; requires ``wetting_source`` to
    have been accumulated over every accepted step.
    """
    v0 = wetting_volume(grid, traj.states[0])
    v1 = wetting_volume(grid, traj.states[-1])
    src = traj.wetting_source[-1]
    scale = max(abs(v0), abs(v1), abs(src), 1e-300)
    return abs((v1 - v0) - src) / scale
