"""Builders for the three benchmark problems and their diagnostics.

All builders take a rotation angle ``theta``.  Geometry (wells, permeability
pattern, barriers, tilt) is defined in the rotated frame ``(x', y')`` and
sampled on the fixed Cartesian grid, so rotating the problem is equivalent to
rotating the grid in the opposite direction.

Time is in days internally; the well cases convert their PVI schedule with
the injection rate and the pore volume of the disc.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .fluid import FluidModel, fractional_flow_slope_max, mobilities
from .grid import CartesianGrid, build_dual, load_array_file, rotate_coords, build_grid
from .solver import SimState, WellSet, well_index
from .units import DARCY, GRAVITY

CASE_IDS = ("THREE_WELL", "HETEROGENEOUS", "SEGREGATION")
DEFAULT_POROSITY = 0.2


@dataclass(frozen=True)
class CaseSpec:
    """What to build.  ``None`` fields take the case defaults.

    ``dt`` and ``t_end`` are in PVI for the well cases and in days for the
    segregation case.  ``cfl`` picks the small (``"small"``) or large
    (``"large"``) time step of the benchmark tables.  ``params`` overrides
    case constants by name (see the ``*_DEFAULTS`` dictionaries).
    """

    case: str = "THREE_WELL"
    theta: float = 0.0
    resolution: int | None = None
    dt: float | None = None
    t_end: float | None = None
    cfl: str = "small"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.case not in CASE_IDS:
            raise ValueError(f"unknown case {self.case!r}")
        if not 0.0 <= self.theta < np.pi / 2:
            raise ValueError("theta must lie in [0, pi/2)")
        if self.resolution is not None and self.resolution < 9:
            raise ValueError("resolution must be >= 9")
        if self.cfl not in ("small", "large"):
            raise ValueError("cfl must be 'small' or 'large'")


@dataclass
class Case:
    spec: CaseSpec
    grid: object
    dual: object
    fluid: FluidModel
    wells: WellSet
    initial: SimState
    dt: float  # days
    t_end: float  # days
    disc: np.ndarray  # cells inside the active disc
    producers: list = field(default_factory=list)  # producer cell indices
    injector: int | None = None
    pvi_per_day: float | None = None  # 1 / (disc pore volume / injection rate)
    meta: dict = field(default_factory=dict)

    def time_in_pvi(self, t):
        return None if self.pvi_per_day is None else t * self.pvi_per_day


THREE_WELL_DEFAULTS = {
    "n": 51,
    "half_width": 0.5,
    "k_in": 50.0,
    "k_out": 5e-5,
    "porosity": DEFAULT_POROSITY,
    "producer_radius": 0.3,
    "gravity_number": 1.3,
    "rate_radius": 0.3,
    "dt_small": 0.0013,
    "dt_large": 0.0013 * 59.7 / 3.4,
    "t_end": 0.092,
    "p_bhp": 0.0,
}

HETEROGENEOUS_DEFAULTS = {
    "n": 101,
    "half_width": 75.0,
    "k_out": 1e-10,
    "porosity": DEFAULT_POROSITY,
    "bump_height": 20.0,
    "pattern_scale": 75.0,
    "gravity_number": 12.9,
    "k_rep": 200.0,
    "rate_radius": None,
    "dt_small": 0.0021,
    "dt_large": 0.01,
    "t_end": 0.06,
    "p_fixed": 0.0,
}

SEGREGATION_DEFAULTS = {
    "n": 101,
    "half_width": 75.0,
    "k_in": 50.0,
    "k_barrier": 5e-9,
    "porosity": DEFAULT_POROSITY,
    "tilt": np.pi / 3,
    "barrier_y": (-25.0, 5.0, 35.0),
    "barrier_x": ((-75.0, 25.0), (-25.0, 75.0), (-75.0, 25.0)),
    "barrier_thickness": 3.0,
    "band": (-75.0, -45.0),
    "cfl_small": 8.9,
    "cfl_large": 17.8,
    "t_end": 6000.0,
}

THREE_WELL_FLUID = FluidModel(rho_w=64.0, rho_nw=32.0, mu_w=1.0, mu_nw=100.0, w_exponent=2.0, nw_exponent=4.0)
SEGREGATION_FLUID = FluidModel(rho_w=64.0, rho_nw=32.0, mu_w=1.0, mu_nw=2.0, w_exponent=1.5, nw_exponent=2.0)


def _params(defaults, spec):
    unknown = set(spec.params) - set(defaults)
    if unknown:
        raise ValueError(f"unknown case parameters: {sorted(unknown)}")
    p = dict(defaults)
    p.update(spec.params)
    if spec.resolution is not None:
        p["n"] = spec.resolution
    return p


def gravity_number(k, fluid, grad_z, u_T):
    """``k |g_w - g_nw| / (mu_w |u_T|)`` with ``g_l = rho_l g |grad z|``."""
    return DARCY * k * abs(fluid.rho_w - fluid.rho_nw) * fluid.g * grad_z / (fluid.mu_w * abs(u_T))


def rate_for_gravity_number(n_g, k, fluid, grad_z, radius, thickness=1.0):
    """Injection rate giving total velocity ``u_T`` at ``radius`` such that N_G = ``n_g``."""
    u_T = DARCY * k * abs(fluid.rho_w - fluid.rho_nw) * fluid.g * grad_z / (fluid.mu_w * n_g)
    return 2.0 * np.pi * radius * thickness * u_T


def _steps(t_end, dt):
    n = max(1, int(round(t_end / dt)))
    return t_end / n


def three_well_case(spec=None, **kw):
    spec = spec or CaseSpec("THREE_WELL", **kw)
    p = _params(THREE_WELL_DEFAULTS, spec)
    n, L, th = p["n"], p["half_width"], spec.theta
    dx = 2 * L / n
    r0 = (2 * L - dx) / 2
    fluid = THREE_WELL_FLUID

    def perm(x, y):
        return np.where(np.hypot(x, y) < r0, p["k_in"], p["k_out"])

    def depth(x, y):
        # buoyancy perpendicular to the producer line; producers updip
        return rotate_coords(x, y, th)[1]

    grid = build_grid(n, n, (-L, L, -L, L), perm, p["porosity"], depth)
    dual = build_dual(grid)
    X, Y = grid.cell_centers()
    disc = np.nonzero(np.hypot(X, Y) < r0)[0]

    def locate_rot(xp, yp):
        c, s = np.cos(th), np.sin(th)
        return grid.locate(xp * c - yp * s, xp * s + yp * c)

    inj = locate_rot(0.0, 0.0)
    pr = p["producer_radius"]
    prod_xy = [(-pr * np.sin(np.pi / 6), -pr * np.cos(np.pi / 6)), (pr * np.sin(np.pi / 6), -pr * np.cos(np.pi / 6))]
    prods = [locate_rot(*xy) for xy in prod_xy]
    rate = rate_for_gravity_number(p["gravity_number"], p["k_in"], fluid, 1.0, p["rate_radius"], grid.thickness)
    wells = WellSet(
        injectors=[(inj, rate)],
        producers=[(c, p["p_bhp"], well_index(dual, c)) for c in prods],
    )
    pv_disc = float(grid.pore_volume[disc].sum())
    pvi_per_day = rate / pv_disc
    dt_pvi = spec.dt or (p["dt_small"] if spec.cfl == "small" else p["dt_large"])
    t_pvi = spec.t_end or p["t_end"]
    dt_pvi = _steps(t_pvi, dt_pvi)
    init = SimState(np.zeros(grid.n_cells), np.zeros(grid.n_cells))
    meta = {"r0": r0, "rate": rate, "producer_xy": prod_xy, "dt_pvi": dt_pvi, "t_end_pvi": t_pvi}
    return Case(
        spec, grid, dual, fluid, wells, init, dt_pvi / pvi_per_day, t_pvi / pvi_per_day,
        disc, prods, inj, pvi_per_day, meta,
    )


def heterogeneous_permeability(xp, yp, scale=75.0):
    """Eight-channel permeability pattern in rotated coordinates (mD)."""
    u, v = xp / scale, yp / scale
    ub, vb = rotate_coords(u, v, np.pi / 4)
    prod = np.cos(3 * u * np.pi) * np.cos(3 * v * np.pi) * np.cos(3 * ub * np.pi) * np.cos(3 * vb * np.pi)
    return 200.0 * (1.0 + prod / 2.0) ** 3


def bump_height(r, r0, amplitude=20.0):
    return amplitude * np.sin((1.0 + np.minimum(1.0, r / r0)) * np.pi / 2)


def inner_rim(grid, inside):
    """Cells inside the mask that have a 4-neighbour outside it."""
    m = inside.reshape(grid.ny, grid.nx)
    pad = np.pad(m, 1, constant_values=False)
    all_in = pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:]
    return np.nonzero((m & ~all_in).ravel())[0]


def heterogeneous_case(spec=None, **kw):
    spec = spec or CaseSpec("HETEROGENEOUS", **kw)
    p = _params(HETEROGENEOUS_DEFAULTS, spec)
    n, L, th = p["n"], p["half_width"], spec.theta
    dx = 2 * L / n
    r0 = (2 * L - dx) / 2
    fluid = THREE_WELL_FLUID

    def perm(x, y):
        xp, yp = rotate_coords(x, y, th)
        k = heterogeneous_permeability(xp, yp, p["pattern_scale"])
        return np.where(np.hypot(x, y) <= r0, k, p["k_out"])

    def depth(x, y):
        return -bump_height(np.hypot(x, y), r0, p["bump_height"])

    grid = build_grid(n, n, (-L, L, -L, L), perm, p["porosity"], depth)
    dual = build_dual(grid)
    X, Y = grid.cell_centers()
    inside = np.hypot(X, Y) <= r0
    disc = np.nonzero(inside)[0]
    rim = inner_rim(grid, inside)
    inj = grid.locate(0.0, 0.0)
    grad_rep = p["bump_height"] / r0
    r_rep = p["rate_radius"] if p["rate_radius"] is not None else r0 / 2
    rate = rate_for_gravity_number(p["gravity_number"], p["k_rep"], fluid, grad_rep, r_rep, grid.thickness)
    wells = WellSet(injectors=[(inj, rate)], dirichlet=[(int(c), p["p_fixed"]) for c in rim])
    pv_disc = float(grid.pore_volume[disc].sum())
    pvi_per_day = rate / pv_disc
    dt_pvi = spec.dt or (p["dt_small"] if spec.cfl == "small" else p["dt_large"])
    t_pvi = spec.t_end or p["t_end"]
    dt_pvi = _steps(t_pvi, dt_pvi)
    init = SimState(np.zeros(grid.n_cells), np.zeros(grid.n_cells))
    meta = {"r0": r0, "rate": rate, "n_dirichlet": int(rim.size), "dt_pvi": dt_pvi, "t_end_pvi": t_pvi}
    return Case(
        spec, grid, dual, fluid, wells, init, dt_pvi / pvi_per_day, t_pvi / pvi_per_day,
        disc, [], inj, pvi_per_day, meta,
    )


def barrier_mask(xp, yp, p):
    half = p["barrier_thickness"] / 2
    mask = np.zeros(np.shape(xp), dtype=bool)
    for yc, (xa, xb) in zip(p["barrier_y"], p["barrier_x"]):
        mask |= (np.abs(yp - yc) < half) & (xp >= xa) & (xp <= xb)
    return mask


def buoyancy_time_step(cfl, grid, fluid, k, sin_tilt):
    """Step giving a buoyancy CFL of ``cfl`` for a column of permeability ``k``.

    The fastest gravity-driven transport speed is
    ``k drho g sin(tilt) max |d(lam_w lam_nw / lam_T)/dS| / phi``.
    """
    S = np.linspace(0.0, 1.0, 4001)
    mob = mobilities(fluid, S)
    psi = mob.lam_w * mob.lam_nw / mob.lam_T
    slope = float(np.max(np.abs(np.gradient(psi, S))))
    speed = DARCY * k * abs(fluid.rho_w - fluid.rho_nw) * fluid.g * sin_tilt * slope
    phi = float(np.median(grid.poro))
    return cfl * phi * min(grid.dx, grid.dy) / speed


def segregation_case(spec=None, **kw):
    spec = spec or CaseSpec("SEGREGATION", **kw)
    p = _params(SEGREGATION_DEFAULTS, spec)
    n, L, th = p["n"], p["half_width"], spec.theta
    dx = 2 * L / n
    r0 = (2 * L - dx) / 2
    fluid = SEGREGATION_FLUID

    def perm(x, y):
        xp, yp = rotate_coords(x, y, th)
        k = np.where(barrier_mask(xp, yp, p), p["k_barrier"], p["k_in"])
        return np.where(np.hypot(x, y) <= r0, k, p["k_barrier"])

    def depth(x, y):
        # tilt perpendicular to the layers: deeper towards -y'
        return -rotate_coords(x, y, th)[1] * np.sin(p["tilt"])

    grid = build_grid(n, n, (-L, L, -L, L), perm, p["porosity"], depth)
    dual = build_dual(grid)
    X, Y = grid.cell_centers()
    inside = np.hypot(X, Y) <= r0
    _, yp = rotate_coords(X, Y, th)
    lo, hi = p["band"]
    S0 = np.where(inside & (yp > lo) & (yp < hi), 0.0, 1.0)
    init = SimState(np.zeros(grid.n_cells), S0)
    cfl = spec.dt is None and (p["cfl_small"] if spec.cfl == "small" else p["cfl_large"])
    dt = spec.dt or buoyancy_time_step(cfl, grid, fluid, p["k_in"], np.sin(p["tilt"]))
    t_end = spec.t_end or p["t_end"]
    dt = _steps(t_end, dt)
    meta = {"r0": r0, "cfl_target": cfl or None, "n_barrier": int(np.sum(grid.perm[inside] < 1.0))}
    return Case(spec, grid, dual, fluid, WellSet(), init, dt, t_end, np.nonzero(inside)[0], meta=meta)


BUILDERS = {
    "THREE_WELL": three_well_case,
    "HETEROGENEOUS": heterogeneous_case,
    "SEGREGATION": segregation_case,
}


def build_case(spec):
    return BUILDERS[spec.case](spec)


def override_fields(case, paths):
    """Replace grid fields with arrays read from plain-text files.

    ``paths`` maps ``perm``/``poro``/``depth`` to files holding ``nx*ny``
    row-major values (row 0 = minimum y).  Well indices are recomputed.
    """
    g = case.grid
    arrays = {k: load_array_file(v, g.n_cells) for k, v in paths.items()}
    grid = CartesianGrid(
        g.nx, g.ny, g.dx, g.dy, g.x0, g.y0,
        arrays.get("perm", g.perm), arrays.get("poro", g.poro), arrays.get("depth", g.depth), g.thickness,
    )
    if np.any(grid.perm <= 0) or np.any((grid.poro <= 0) | (grid.poro > 1)):
        raise ValueError("overridden permeability must be positive and porosity in (0, 1]")
    dual = build_dual(grid)
    wells = WellSet(
        injectors=list(case.wells.injectors),
        producers=[(c, b, well_index(dual, c)) for c, b, _ in case.wells.producers],
        dirichlet=list(case.wells.dirichlet),
    )
    return replace(case, grid=grid, dual=dual, wells=wells)


# ---------------------------------------------------------------------------
# diagnostics


def water_cut(q_w, q_nw):
    """Wetting fraction of produced volume (rates are negative for production)."""
    q_w = np.abs(np.asarray(q_w, dtype=float))
    q_nw = np.abs(np.asarray(q_nw, dtype=float))
    tot = q_w + q_nw
    return np.where(tot > 0, q_w / np.where(tot > 0, tot, 1.0), 0.0)


def outgoing_volume_rate(dual, fluxes):
    """Per-cell sum of outgoing |u_T| over its half interfaces."""
    uT = fluxes.uT
    cells = dual.cells
    nb = np.roll(cells, -1, axis=1)
    n = dual.grid.n_cells
    out = np.bincount(cells.ravel(), weights=np.maximum(uT, 0).ravel(), minlength=n)
    out += np.bincount(nb.ravel(), weights=np.maximum(-uT, 0).ravel(), minlength=n)
    return out


def cfl_number(dual, fluid, fluxes, dt):
    grid = dual.grid
    rate = outgoing_volume_rate(dual, fluxes) / grid.pore_volume
    return float(dt * rate.max() * fractional_flow_slope_max(fluid))


def countercurrent_fraction(fluxes, rel_threshold=1e-6):
    """Share of two-phase half interfaces where the phases move in opposite directions.

    An interface counts when both phase fluxes exceed ``rel_threshold`` times
    the largest total velocity magnitude in the field.
    """
    Fw, Fn = fluxes.F_w, fluxes.F_nw
    scale = max(float(np.abs(Fw).max()), float(np.abs(Fn).max()), 1e-300)
    active = np.minimum(np.abs(Fw), np.abs(Fn)) > rel_threshold * scale
    n_active = int(active.sum())
    if n_active == 0:
        return 0.0
    return float(np.sum(active & (Fw * Fn < 0)) / n_active)


def orientation_metric(sat_theta, sat_0, grid, theta, disc):
    """Mean absolute difference between the ``theta`` run mapped back and the reference.

    For every reference cell in the disc, the rotated run is sampled (nearest
    cell) at the location where the same point of the rotated problem sits.
    """
    X, Y = grid.cell_centers()
    c, s = np.cos(theta), np.sin(theta)
    xs, ys = X[disc] * c - Y[disc] * s, X[disc] * s + Y[disc] * c
    i = np.clip(np.floor((xs - grid.x0) / grid.dx).astype(int), 0, grid.nx - 1)
    j = np.clip(np.floor((ys - grid.y0) / grid.dy).astype(int), 0, grid.ny - 1)
    mapped = np.asarray(sat_theta)[j * grid.nx + i]
    return float(np.mean(np.abs(mapped - np.asarray(sat_0)[disc])))


@dataclass
class Diagnostics:
    water_cut: np.ndarray | None  # (steps, producers)
    pvi: np.ndarray | None
    times: np.ndarray
    cfl: float
    gravity_number: float | None
    countercurrent_fraction: float
    newton_iterations: int
    time_step_cuts: int

    def to_dict(self):
        d = {
            "cfl": self.cfl,
            "gravity_number": self.gravity_number,
            "countercurrent_fraction": self.countercurrent_fraction,
            "newton_iterations": self.newton_iterations,
            "time_step_cuts": self.time_step_cuts,
        }
        return d


class FluxRecorder:
    """Flux hook for ``advance``: records the countercurrent fraction and CFL per step."""

    def __init__(self, case):
        self.case = case
        self.steps = []
        self.times = []
        self.fractions = []
        self.cfl = []

    def __call__(self, step, t, fluxes):
        self.steps.append(step)
        self.times.append(t)
        self.fractions.append(countercurrent_fraction(fluxes))
        self.cfl.append(cfl_number(self.case.dual, self.case.fluid, fluxes, self.case.dt))

    def second_half_fraction(self):
        if not self.fractions:
            return 0.0
        t = np.array(self.times)
        sel = t >= 0.5 * t[-1] - 1e-12 * t[-1]
        return float(np.mean(np.array(self.fractions)[sel]))


def case_gravity_number(case):
    p = case.spec
    if p.case == "SEGREGATION":
        return None
    rate = case.meta["rate"]
    if p.case == "THREE_WELL":
        k, grad, r = THREE_WELL_DEFAULTS["k_in"], 1.0, THREE_WELL_DEFAULTS["rate_radius"]
        k = p.params.get("k_in", k)
        r = p.params.get("rate_radius", r)
    else:
        k = p.params.get("k_rep", HETEROGENEOUS_DEFAULTS["k_rep"])
        grad = p.params.get("bump_height", 20.0) / case.meta["r0"]
        r = p.params.get("rate_radius") or case.meta["r0"] / 2
    u_T = rate / (2 * np.pi * r * case.grid.thickness)
    return gravity_number(k, case.fluid, grad, u_T)


def diagnostics(case, traj, recorder=None):
    wc = pvi = None
    if traj.producer_rates:
        wc = np.array([water_cut(qw, qn) for _, qw, qn in traj.producer_rates])
    times = np.array([t for t, *_ in traj.producer_rates]) if traj.producer_rates else np.array(traj.times)
    if case.pvi_per_day is not None:
        pvi = times * case.pvi_per_day
    cfl = max(recorder.cfl) if recorder and recorder.cfl else float("nan")
    frac = recorder.second_half_fraction() if recorder else float("nan")
    return Diagnostics(
        wc, pvi, times, cfl, case_gravity_number(case), frac, traj.total_iterations, traj.total_chops
    )


def with_resolution(spec, n):
    return replace(spec, resolution=n)
