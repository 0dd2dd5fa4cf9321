"""Command-line driver: single runs, angle/scheme sweeps, verification, case dumps.

Configuration is one JSON document; every key is optional::

    {
      "case": "THREE_WELL",            # THREE_WELL | HETEROGENEOUS | SEGREGATION
      "angles": [0, "pi/8", "pi/4"],   # radians, numbers or "a*pi/b" strings
      "cfl": ["small", "large"],
      "schemes": ["PPU_1D", "MULTID_IHU"],
      "resolution": 25,
      "dt": null, "t_end": null,       # PVI (well cases) or days (segregation)
      "params": {"gravity_number": 1.3},
      "fields": {"perm": "perm.txt"},  # optional plain-text array overrides
      "flux": {"limiter": null, "c_gamma": 1.0, "freeze_omega": false},
      "newton": {"max_iters": 50, "dS_max": 0.2, "tol": 1e-8},
      "output": {"vtk": false, "snapshot_every": 0},
      "seed": 0
    }

``"angle"``, ``"scheme"`` are accepted as singular forms.  Unknown keys are
rejected.  Environment variables ``MDIHU_OUT`` and ``MDIHU_THREADS`` provide
defaults for ``--out`` and ``--threads``.
"""

import argparse
import csv
import itertools
import json
import logging
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cases import CASE_IDS, CaseSpec, FluxRecorder, build_case, diagnostics, orientation_metric, override_fields
from .flux import LIMITERS, SCHEMES, SchemeConfig
from .solver import Assembler, NewtonConfig, advance, mass_balance_error

log = logging.getLogger("mdihu")

SCHEME_LABELS = {"PPU_1D": "1D-PPU", "IHU_1D": "1D-IHU", "MULTID_PPU": "MultiD-PPU", "MULTID_IHU": "MultiD-IHU"}
TOP_KEYS = {
    "case", "angle", "angles", "cfl", "schemes", "scheme", "resolution", "dt", "t_end",
    "params", "fields", "flux", "newton", "output", "seed",
}
FLUX_KEYS = {"limiter", "c_gamma", "gamma_delta", "freeze_omega"}
NEWTON_KEYS = {"max_iters", "dS_max", "tol", "chop_factor", "min_dt_fraction"}
OUTPUT_KEYS = {"vtk", "snapshot_every"}
FIELD_KEYS = {"perm", "poro", "depth"}
DEFAULT_C_GAMMA = 1.0


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    case: str = "THREE_WELL"
    angles: list = field(default_factory=lambda: [0.0])
    cfls: list = field(default_factory=lambda: ["small"])
    schemes: list = field(default_factory=lambda: [SchemeConfig("MULTID_IHU", c_gamma=DEFAULT_C_GAMMA)])
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    resolution: int | None = None
    dt: float | None = None
    t_end: float | None = None
    params: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)
    vtk: bool = False
    snapshot_every: int = 0
    seed: int = 0
    base_dir: Path = Path(".")


@dataclass
class RunDescriptor:
    spec: CaseSpec
    scheme: SchemeConfig
    newton: NewtonConfig
    fields: dict
    vtk: bool
    snapshot_every: int

    @property
    def name(self):
        deg = math.degrees(self.spec.theta)
        return f"{self.spec.case.lower()}_{self.scheme.scheme.lower()}_{self.spec.cfl}_theta{deg:06.2f}"


_ANGLE_RE = re.compile(r"^\s*(?:(?P<num>[0-9.]+)\s*\*?\s*)?pi\s*(?:/\s*(?P<den>[0-9.]+))?\s*$")


def parse_angle(value, where="angle"):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        theta = float(value)
    elif isinstance(value, str):
        m = _ANGLE_RE.match(value)
        if m:
            theta = float(m.group("num") or 1.0) * math.pi / float(m.group("den") or 1.0)
        else:
            try:
                theta = float(value)
            except ValueError:
                raise ConfigError(f"{where}: cannot parse angle {value!r}") from None
    else:
        raise ConfigError(f"{where}: angle must be a number or string")
    if not 0.0 <= theta < math.pi / 2:
        raise ConfigError(f"{where}: angle {theta} outside [0, pi/2)")
    return theta


def _as_list(doc, single, plural):
    if single in doc and plural in doc:
        raise ConfigError(f"give either {single!r} or {plural!r}, not both")
    if plural in doc:
        v = doc[plural]
        if not isinstance(v, list) or not v:
            raise ConfigError(f"{plural}: must be a nonempty list")
        return v
    if single in doc:
        v = doc[single]
        return v if isinstance(v, list) else [v]
    return None


def _check_keys(section, allowed, where):
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: must be an object")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")


def config_from_dict(doc, base_dir=Path(".")):
    _check_keys(doc, TOP_KEYS, "config")
    cfg = RunConfig(base_dir=Path(base_dir))
    case = doc.get("case", "THREE_WELL")
    if case not in CASE_IDS:
        raise ConfigError(f"case: unknown case {case!r}")
    cfg.case = case
    angles = _as_list(doc, "angle", "angles")
    if angles is not None:
        key = "angles" if "angles" in doc else "angle"
        cfg.angles = [parse_angle(a, key) for a in angles]
    cfls = doc.get("cfl")
    if cfls is not None:
        cfls = cfls if isinstance(cfls, list) else [cfls]
        for c in cfls:
            if c not in ("small", "large"):
                raise ConfigError(f"cfl: expected 'small' or 'large', got {c!r}")
        cfg.cfls = cfls
    flux = doc.get("flux", {})
    _check_keys(flux, FLUX_KEYS, "flux")
    if flux.get("limiter") is not None and flux["limiter"] not in LIMITERS:
        raise ConfigError(f"flux.limiter: unknown limiter {flux['limiter']!r}")
    schemes = _as_list(doc, "scheme", "schemes") or ["MULTID_IHU"]
    sc = []
    for s in schemes:
        if s not in SCHEMES:
            raise ConfigError(f"schemes: unknown scheme {s!r}")
        sc.append(
            SchemeConfig(
                s,
                flux.get("limiter"),
                float(flux.get("c_gamma", DEFAULT_C_GAMMA)),
                float(flux.get("gamma_delta", 1e-9)),
                bool(flux.get("freeze_omega", False)),
            )
        )
    cfg.schemes = sc
    newton = doc.get("newton", {})
    _check_keys(newton, NEWTON_KEYS, "newton")
    try:
        cfg.newton = NewtonConfig(**newton)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"newton: {exc}") from None
    res = doc.get("resolution")
    if res is not None and (not isinstance(res, int) or res < 9):
        raise ConfigError("resolution: must be an integer >= 9")
    cfg.resolution = res
    for key in ("dt", "t_end"):
        v = doc.get(key)
        if v is not None and (not isinstance(v, (int, float)) or v <= 0):
            raise ConfigError(f"{key}: must be a positive number")
        setattr(cfg, key, v)
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params: must be an object")
    cfg.params = params
    fields = doc.get("fields", {})
    _check_keys(fields, FIELD_KEYS, "fields")
    cfg.fields = {k: str((Path(base_dir) / v)) for k, v in fields.items()}
    out = doc.get("output", {})
    _check_keys(out, OUTPUT_KEYS, "output")
    cfg.vtk = bool(out.get("vtk", False))
    cfg.snapshot_every = int(out.get("snapshot_every", 0))
    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed: must be an integer")
    cfg.seed = seed
    # validate case parameters once, early
    try:
        CaseSpec(cfg.case, cfg.angles[0], cfg.resolution, cfg.dt, cfg.t_end, cfg.cfls[0], cfg.params)
    except ValueError as exc:
        raise ConfigError(f"case: {exc}") from None
    return cfg


def parse_config(path):
    """Read a JSON config file; an empty file gives all defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        return RunConfig(base_dir=path.parent)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(doc, path.parent)


def run_descriptors(cfg):
    out = []
    for cfl, scheme, theta in itertools.product(cfg.cfls, cfg.schemes, cfg.angles):
        spec = CaseSpec(cfg.case, theta, cfg.resolution, cfg.dt, cfg.t_end, cfl, dict(cfg.params))
        out.append(RunDescriptor(spec, scheme, cfg.newton, cfg.fields, cfg.vtk, cfg.snapshot_every))
    return out


# ---------------------------------------------------------------------------
# output


def write_map_csv(path, grid, values):
    arr = np.asarray(values).reshape(grid.ny, grid.nx)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i={i}" for i in range(grid.nx)])
        for row in arr:
            w.writerow([repr(float(v)) for v in row])


def write_vtk(path, grid, arrays, title="mdihu"):
    """ASCII legacy-VTK structured points with cell data."""
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 2",
        f"ORIGIN {grid.x0!r} {grid.y0!r} 0",
        f"SPACING {grid.dx!r} {grid.dy!r} {grid.thickness!r}",
        f"CELL_DATA {grid.n_cells}",
    ]
    for name, vals in arrays.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(repr(float(v)) for v in np.asarray(vals).ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def write_saturation(out_dir, stem, case, state, t, desc, vtk):
    grid = case.grid
    write_map_csv(out_dir / f"{stem}.csv", grid, state.S)
    meta = {
        "quantity": "wetting saturation",
        "units": "-",
        "layout": "ny rows x nx columns, row 0 = minimum y",
        "nx": grid.nx,
        "ny": grid.ny,
        "extents_ft": [grid.x0, grid.x0 + grid.nx * grid.dx, grid.y0, grid.y0 + grid.ny * grid.dy],
        "theta_rad": desc.spec.theta,
        "time_days": t,
        "pvi": case.time_in_pvi(t),
        "case": desc.spec.case,
        "scheme": desc.scheme.scheme,
        "limiter": desc.scheme.limiter,
    }
    (out_dir / f"{stem}.json").write_text(json.dumps(meta, indent=2) + "\n")
    if vtk:
        write_vtk(out_dir / f"{stem}.vtk", grid, {"saturation": state.S, "pressure_psi": state.p})


def write_newton_log(path, traj):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "t_days", "dt_days", "iterations", "chops", "residual"])
        for r in traj.log:
            w.writerow([r.step, repr(r.t), repr(r.dt), r.iterations, r.chops, f"{r.residual:.6e}"])


def write_water_cut(path, case, traj):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        names = [f"water_cut_producer{i}[-]" for i in range(len(case.producers))]
        w.writerow(["t_days", "pvi"] + names + [f"q_w_producer{i}[ft3/day]" for i in range(len(case.producers))]
                   + [f"q_nw_producer{i}[ft3/day]" for i in range(len(case.producers))])
        from .cases import water_cut

        for t, qw, qn in traj.producer_rates:
            wc = water_cut(qw, qn)
            w.writerow([repr(t), repr(case.time_in_pvi(t))] + [repr(float(x)) for x in wc]
                       + [repr(float(x)) for x in qw] + [repr(float(x)) for x in qn])


def execute(desc, out_dir):
    """Run one simulation and write its artifacts.  Returns a summary dict."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "FAILED").unlink(missing_ok=True)
    case = build_case(desc.spec)
    if desc.fields:
        case = override_fields(case, desc.fields)
    asm = Assembler(case.dual, case.fluid, desc.scheme, case.wells)
    rec = FluxRecorder(case)
    prod = np.array(case.producers, dtype=int) if case.producers else None
    t0 = time.perf_counter()
    traj = advance(
        asm, case.initial, case.t_end, case.dt, desc.newton,
        keep_states=desc.snapshot_every > 0, keep_every=max(desc.snapshot_every, 1),
        flux_hook=rec, producer_cells=prod,
    )
    elapsed = time.perf_counter() - t0
    final = traj.states[-1]
    t_final = traj.times[-1]
    write_saturation(out_dir, "saturation_final", case, final, t_final, desc, desc.vtk)
    if desc.snapshot_every > 0:
        for t, st in zip(traj.times, traj.states):
            write_saturation(out_dir, f"saturation_t{t:012.4f}", case, st, t, desc, desc.vtk)
    write_newton_log(out_dir / "newton_log.csv", traj)
    if case.producers:
        write_water_cut(out_dir / "water_cut.csv", case, traj)
    diag = diagnostics(case, traj, rec)
    S_all = np.array([s.S for s in traj.states])
    summary = {
        "name": desc.name,
        "case": desc.spec.case,
        "scheme": desc.scheme.scheme,
        "limiter": desc.scheme.limiter,
        "c_gamma": desc.scheme.c_gamma,
        "freeze_omega": desc.scheme.freeze_omega,
        "theta_rad": desc.spec.theta,
        "cfl_setting": desc.spec.cfl,
        "resolution": case.grid.nx,
        "dt_days": case.dt,
        "t_end_days": case.t_end,
        "steps": len(traj.log),
        "aborted": traj.aborted,
        "S_min": float(S_all.min()),
        "S_max": float(S_all.max()),
        "mass_balance_rel": mass_balance_error(case.grid, traj) if not traj.aborted else None,
        "elapsed_s": elapsed,
        **diag.to_dict(),
        "meta": {k: v for k, v in case.meta.items() if isinstance(v, (int, float, str, list, tuple, type(None)))},
    }
    (out_dir / "diagnostics.json").write_text(json.dumps(summary, indent=2, default=float) + "\n")
    np.save(out_dir / "saturation_final.npy", final.S)
    if traj.aborted:
        (out_dir / "FAILED").write_text(f"solver aborted at t = {traj.log[-1].t} days\n")
    return summary


def _execute_star(args):
    desc, out_dir = args
    try:
        return execute(desc, out_dir)
    except Exception as exc:  # keep the sweep going; mark the run
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "FAILED").write_text(f"{type(exc).__name__}: {exc}\n")
        return {"name": desc.name, "aborted": True, "error": str(exc), "case": desc.spec.case,
                "scheme": desc.scheme.scheme, "theta_rad": desc.spec.theta, "cfl_setting": desc.spec.cfl}


def run_all(descs, out_root, threads=1):
    jobs = [(d, Path(out_root) / d.name) for d in descs]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_execute_star, jobs))
    return [_execute_star(j) for j in jobs]


def orientation_table(results, out_root):
    """Orientation metric of every run against the theta = 0 run of its scheme/CFL."""
    from .cases import build_case as _build

    rows = []
    refs = {}
    for r in results:
        if not r.get("aborted") and r["theta_rad"] == 0.0:
            refs[(r["scheme"], r["cfl_setting"])] = r
    for r in results:
        key = (r["scheme"], r["cfl_setting"])
        if r.get("aborted") or key not in refs or r["theta_rad"] == 0.0:
            continue
        ref = refs[key]
        s_t = np.load(Path(out_root) / r["name"] / "saturation_final.npy")
        s_0 = np.load(Path(out_root) / ref["name"] / "saturation_final.npy")
        case0 = _build(CaseSpec(r["case"], 0.0, r["resolution"]))
        m = orientation_metric(s_t, s_0, case0.grid, r["theta_rad"], case0.disc)
        rows.append({"scheme": r["scheme"], "cfl": r["cfl_setting"], "theta_rad": r["theta_rad"], "metric": m})
    return rows


def format_table(results):
    """Iteration counts laid out like the benchmark tables (angle rows, scheme columns per CFL block)."""
    cfls = [c for c in ("small", "large") if any(r.get("cfl_setting") == c for r in results)]
    schemes = [s for s in SCHEMES if any(r.get("scheme") == s for r in results)]
    angles = sorted({r["theta_rad"] for r in results})
    lookup = {(r["cfl_setting"], r["scheme"], r["theta_rad"]): r for r in results}
    head1 = ["Angle"] + [f"{c.capitalize()} CFL" if i == 0 else "" for c in cfls for i, _ in enumerate(schemes)]
    head2 = ["theta"] + [SCHEME_LABELS[s] for _ in cfls for s in schemes]
    rows = [head1, head2]
    for a in angles:
        row = [_angle_label(a)]
        for c in cfls:
            for s in schemes:
                r = lookup.get((c, s, a))
                if r is None:
                    row.append("-")
                elif r.get("aborted"):
                    row.append("FAILED")
                else:
                    cut = r.get("time_step_cuts", 0)
                    row.append(f"{r['newton_iterations']}" + (f" ({cut} cuts)" if cut else ""))
        rows.append(row)
    widths = [max(len(str(row[i])) for row in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(str(v).rjust(w) for v, w in zip(row, widths)) for row in rows)


def _angle_label(theta):
    for den in (1, 2, 3, 4, 6, 8, 12, 16, 24):
        num = theta * den / math.pi
        if abs(num - round(num)) < 1e-9:
            n = int(round(num))
            if n == 0:
                return "0"
            return f"{'' if n == 1 else n}pi/{den}" if den != 1 else f"{n}pi"
    return f"{theta:.6f}"


def write_summary(results, out_root):
    out_root = Path(out_root)
    keys = ["name", "case", "scheme", "cfl_setting", "theta_rad", "newton_iterations", "time_step_cuts",
            "steps", "aborted", "S_min", "S_max", "mass_balance_rel", "cfl", "countercurrent_fraction", "elapsed_s"]
    with open(out_root / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, extrasaction="ignore")
        w.writeheader()
        for r in results:
            w.writerow({k: r.get(k, "") for k in keys})
    table = format_table(results)
    (out_root / "summary_table.txt").write_text(table + "\n")
    orient = orientation_table(results, out_root)
    if orient:
        with open(out_root / "orientation.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["scheme", "cfl", "theta_rad", "metric"])
            w.writeheader()
            w.writerows(orient)
    return table


# ---------------------------------------------------------------------------
# subcommands


def _out_dir(args):
    return Path(args.out or os.environ.get("MDIHU_OUT") or "mdihu_out")


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    return max(1, int(os.environ.get("MDIHU_THREADS", "1")))


def _load(args):
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def cmd_run(args, parallel=False):
    cfg = _load(args)
    descs = run_descriptors(cfg)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    threads = _threads(args) if parallel else 1
    log.info("%d run(s) -> %s", len(descs), out)
    results = run_all(descs, out, threads)
    for r in results:
        status = "FAILED" if r.get("aborted") else f"{r['newton_iterations']} iterations"
        print(f"{r['name']}: {status}")
    if parallel or len(results) > 1:
        print(write_summary(results, out))
    return 1 if any(r.get("aborted") for r in results) else 0


def cmd_verify(args):
    from .verify import format_summary, run_suite, write_reports_csv

    cfg = _load(args) if args.config else RunConfig(seed=args.seed or 0)
    seed = args.seed if args.seed is not None else cfg.seed
    reports = run_suite(args.samples, seed)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    write_reports_csv(reports, out / "verify.csv")
    summary = format_summary(reports)
    (out / "verify_summary.txt").write_text(summary + "\n")
    print(summary)
    return 0 if all(r.passed for r in reports) else 1


def cmd_dump_case(args):
    cfg = _load(args)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    for theta in cfg.angles:
        spec = CaseSpec(cfg.case, theta, cfg.resolution, cfg.dt, cfg.t_end, cfg.cfls[0], dict(cfg.params))
        case = build_case(spec)
        if cfg.fields:
            case = override_fields(case, cfg.fields)
        stem = f"{cfg.case.lower()}_theta{math.degrees(theta):06.2f}"
        d = out / stem
        d.mkdir(exist_ok=True)
        g = case.grid
        for name, vals in (("perm_mD", g.perm), ("poro", g.poro), ("depth_ft", g.depth), ("S_init", case.initial.S)):
            write_map_csv(d / f"{name}.csv", g, vals)
        wells = {
            "injectors": [{"cell": int(c), "rate_ft3_per_day": q} for c, q in case.wells.injectors],
            "producers": [{"cell": int(c), "p_bhp_psi": b, "well_index": wi} for c, b, wi in case.wells.producers],
            "dirichlet_cells": [int(c) for c, _ in case.wells.dirichlet],
            "dt_days": case.dt,
            "t_end_days": case.t_end,
            "nx": g.nx,
            "ny": g.ny,
            "extents_ft": [g.x0, g.x0 + g.nx * g.dx, g.y0, g.y0 + g.ny * g.dy],
        }
        (d / "case.json").write_text(json.dumps(wells, indent=2) + "\n")
        if cfg.vtk:
            write_vtk(d / "case.vtk", g, {"perm_mD": g.perm, "poro": g.poro, "depth_ft": g.depth, "S_init": case.initial.S})
        print(d)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="mdihu", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH", help="JSON configuration file")
        sp.add_argument("--out", metavar="DIR", help="output directory (env MDIHU_OUT)")
        sp.add_argument("--threads", type=int, metavar="N", help="worker processes (env MDIHU_THREADS)")
        sp.add_argument("--seed", type=int, metavar="N", help="RNG seed for sampled checks")

    common(sub.add_parser("run", help="run the configured simulation(s) one after another"))
    common(sub.add_parser("sweep", help="run all angle/scheme/CFL combinations in parallel and tabulate"))
    v = sub.add_parser("verify", help="run the property-check suite")
    common(v)
    v.add_argument("--samples", type=int, default=100_000, help="random samples per check")
    common(sub.add_parser("dump-case", help="write grids, fields and wells without simulating"))
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_run(args, parallel=True)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "dump-case":
            return cmd_dump_case(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
