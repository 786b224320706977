"""Command-line front end.

Every subcommand reads one JSON run configuration, writes ``<command>.json``
(machine readable, sorted keys) and ``<command>.txt`` (human readable) into
the output directory, plus CSV files where relevant. Exit status is 0 on
success, 1 for domain errors and 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from contextlib import nullcontext

import numpy as np

from .analysis import characterize, find_rf_null, micromotion_residual
from .compensation import (CompensationTarget, VrfFitInput, format_table, predict_table,
                           solve_static_voltages, fit_vrf)
from .config import ConfigError, RunConfig, reference_config
from .constants import MHz, meV, um
from .crystal import HarmonicModel, TrapModel, equilibrium, zigzag_analysis
from .errors import PlaneBelowSurface, RangeExhausted, TrapError
from .fields import FieldModel
from .geometry import min_clearance
from .heating import FilterNoiseModel, effective_distance, escape_heating_rate, johnson_heating_rate
from .pseudo import EffectivePotential, mathieu_q

COMMANDS = ("validate", "fieldmap", "characterize", "compensate", "fit-vrf", "crystal",
            "heating", "table")

FIELDMAP_HEADER = ["x_um", "y_um", "z_um", "phi_static_V", "Ex_V_per_m", "Ey_V_per_m",
                   "Ez_V_per_m", "phi_ps_meV", "U_total_meV"]
CRYSTAL_HEADER = ["ion_index", "x_um", "y_um", "z_um"]


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def _plain(obj):
    """Recursively convert numpy containers and scalars to JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_atomic(path, text: str):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(report: dict) -> str:
    return json.dumps(_plain(report), sort_keys=True, indent=2) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if not isinstance(v, (int, np.integer)) else int(v) for v in r])
    return buf.getvalue()


def _kv_text(title: str, items) -> str:
    lines = [title, "-" * len(title)]
    width = max(len(k) for k, _ in items) if items else 0
    for k, v in items:
        lines.append(f"{k:<{width}}  {v}")
    return "\n".join(lines) + "\n"


def _fmt3(v, scale=1.0, spec=".3f"):
    return "(" + ", ".join(format(float(x) / scale, spec) for x in v) + ")"


# --------------------------------------------------------------------------
# shared builders
# --------------------------------------------------------------------------

class Context:
    """Objects built once per run from the configuration."""

    def __init__(self, config: RunConfig, seed: int = 0):
        self.config = config
        self.seed = int(seed)
        self.layout = config.layout()
        self.model = FieldModel(self.layout)
        self.drive = config.drive()
        self.ion = config.ion()
        self.solver = config.solver()

    def potential(self, statics=None, drive=None):
        statics = self.config.statics() if statics is None else statics
        return EffectivePotential(self.model, self.model.static(statics), drive or self.drive,
                                  self.ion)

    @property
    def depth_spacing(self):
        return self.solver["depth_spacing_um"] * um


def _section(config: RunConfig, name: str) -> dict:
    sec = config.section(name)
    if sec is None:
        base = reference_config().get(name)
        if base is None:
            raise ConfigError(f"{name}: section required for this command")
        return base
    return sec


# --------------------------------------------------------------------------
# subcommands; each returns (report dict, text, extra files)
# --------------------------------------------------------------------------

def cmd_validate(ctx: Context, args):
    lay = ctx.layout
    lo, hi = lay.bounds
    electrodes = [{"name": e.name, "kind": e.kind.value if hasattr(e.kind, "value") else str(e.kind),
                   "polygons": len(e.polygons), "area_um2": e.area / um**2}
                  for e in lay.electrodes]
    report = {"valid": True, "electrodes": electrodes,
              "gap_um": lay.gap / um, "min_clearance_um": min_clearance(lay) / um,
              "bounds_um": [(lo / um).tolist(), (hi / um).tolist()],
              "rf": list(lay.rf_names), "controls": list(lay.control_names)}
    items = [(e["name"], f"{e['kind']:<8} area {e['area_um2']:.1f} um^2") for e in electrodes]
    items.append(("min clearance", f"{report['min_clearance_um']:.3f} um"))
    return report, _kv_text("layout valid", items), {}


def fieldmap_points(spec: dict):
    """Grid points (m) for a plane spec; returns (points, shape)."""
    nu, nv = spec["resolution"]
    u = np.linspace(*spec["u_range_um"], nu) * um
    v = np.linspace(*spec["v_range_um"], nv) * um
    off = spec["offset_um"] * um
    normal = spec["normal"]
    # row-major: v is the slow index, u the fast one
    V, U = np.meshgrid(v, u, indexing="ij")
    O = np.full_like(U, off)
    if normal == "x":
        pts = np.stack([O, U, V], axis=-1)
    elif normal == "y":
        pts = np.stack([U, O, V], axis=-1)
    else:
        pts = np.stack([U, V, O], axis=-1)
    pts = pts.reshape(-1, 3)
    if np.min(pts[:, 2]) <= 0:
        raise PlaneBelowSurface("field-map plane reaches z <= 0; the field is only defined above "
                                "the electrode plane")
    return pts, (nv, nu)


def export_fieldmap(ctx: Context, spec: dict):
    """CSV text of the static and pseudopotential fields on a plane, plus a summary."""
    pts, shape = fieldmap_points(spec)
    ep = ctx.potential()
    phi = ep.static.potential(pts)
    E = -ep.static.gradient(pts)
    ps = ep.pseudo_energy(pts) / meV
    tot = ep.energy(pts) / meV
    rows = np.column_stack([pts / um, phi, E, ps, tot])
    k = int(np.argmin(tot))
    summary = {"points": len(pts), "shape": list(shape), "plane": spec,
               "min_cell_um": (pts[k] / um).tolist(), "min_U_total_meV": float(tot[k]),
               "max_U_total_meV": float(np.max(tot))}
    return _csv_text(FIELDMAP_HEADER, rows), summary


def cmd_fieldmap(ctx: Context, args):
    spec = dict(_section(ctx.config, "fieldmap"))
    if args.normal is not None:
        spec["normal"] = args.normal
    if args.offset_um is not None:
        spec["offset_um"] = args.offset_um
    if args.resolution is not None:
        spec["resolution"] = list(args.resolution)
    if min(spec["resolution"]) < 1:
        raise ConfigError("fieldmap/resolution: grid needs at least one point per direction")
    text, summary = export_fieldmap(ctx, spec)
    items = [("points", summary["points"]), ("min cell", _fmt3(summary["min_cell_um"]) + " um"),
             ("min U_total", f"{summary['min_U_total_meV']:.3f} meV")]
    return summary, _kv_text("field map", items), {"fieldmap.csv": text}


def _characterization(ctx: Context, depth: bool, statics=None):
    ep = ctx.potential(statics)
    rf_null = find_rf_null(ctx.model)
    c = characterize(ep, seed=rf_null, depth=depth, depth_spacing=ctx.depth_spacing)
    mm = micromotion_residual(ctx.model, ep.static, rf_null=rf_null, require_static_null=False)
    q = mathieu_q(ctx.layout, ctx.drive, ctx.ion, c.r0, model=ctx.model)
    return ep, c, mm, q


def cmd_characterize(ctx: Context, args):
    _, c, mm, q = _characterization(ctx, depth=not args.no_depth)
    report = c.summary()
    report.update({
        "rf_null_um": mm.rf_null / um,
        "static_field_at_rf_null_V_per_m": mm.residual,
        "static_null_um": None if mm.static_null is None else mm.static_null / um,
        "null_offset_um": None if mm.offset is None else mm.distance / um,
        "mathieu_q": q,
        "vrf_volts": ctx.drive.vrf, "f_rf_hz": ctx.drive.f_hz,
        "statics_volts": ctx.config.statics(),
    })
    items = [("minimum", _fmt3(c.r0, um, ".2f") + " um"),
             ("height", f"{c.r0[2] / um:.2f} um"),
             ("f_axial", f"{c.modes.f_axial / MHz:.3f} MHz"),
             ("f_perp1", f"{c.modes.f_perp1 / MHz:.3f} MHz"),
             ("f_perp2", f"{c.modes.f_perp2 / MHz:.3f} MHz"),
             ("depth U_T", "-" if c.U_T is None else f"{c.U_T / meV:.2f} meV"),
             ("E_static at RF null", f"{mm.residual:.4g} V/m"),
             ("null offset", "-" if mm.offset is None else f"{mm.distance / um:.3f} um"),
             ("RF field at minimum", f"{c.micromotion_field:.4g} V/m"),
             ("Mathieu q", _fmt3(q))]
    return report, _kv_text("trap characterization", items), {}


def cmd_compensate(ctx: Context, args):
    sec = _section(ctx.config, "compensate")
    f_ax = sec.get("f_axial_hz", None)
    if args.f_axial_hz is not None:
        f_ax = args.f_axial_hz
    point = sec.get("target_um")
    target = CompensationTarget(
        point=None if point is None else np.asarray(point, float) * um,
        f_axial=f_ax,
        bounds=tuple(sec.get("bounds_volts", (-10.0, 10.0))),
        normalization=sec.get("normalization", "DC5"),
        normalization_volts=sec.get("normalization_volts"))
    res = solve_static_voltages(ctx.layout, ctx.drive, ctx.ion, target, model=ctx.model)
    report = res.as_dict()
    report["statics"] = {"volts": res.voltages}
    items = [(n, f"{v:+.5f} V  ({res.fractions[n]:+.4f})") for n, v in res.voltages.items()]
    items.append(("residual field", f"{res.residual_field:.3g} V/m"))
    if res.f_axial is not None:
        items.append(("f_axial", f"{res.f_axial / MHz:.4f} MHz"))
    return report, _kv_text("static voltages", items), {}


def cmd_fit_vrf(ctx: Context, args):
    sec = _section(ctx.config, "fit")
    freqs = tuple(sec.get(k) for k in ("f_axial_hz", "f_perp1_hz", "f_perp2_hz"))
    sig = tuple(sec.get("sigma_hz", (0.1 * MHz,) * 3))
    data = VrfFitInput(freqs, ctx.config.statics(), ctx.drive.omega, sig)
    fit = fit_vrf(ctx.layout, data, ctx.ion, model=ctx.model)
    report = {"vrf_volts": fit.vrf, "sigma_vrf_volts": fit.sigma_vrf, "chi2": fit.chi2,
              "measured_MHz": [None if f is None else f / MHz for f in freqs],
              "model_MHz": fit.model_frequencies / MHz, "residuals_sigma": fit.residuals}
    items = [("V_RF", f"{fit.vrf:.3f} +/- {fit.sigma_vrf:.3f} V"), ("chi2", f"{fit.chi2:.3f}"),
             ("model f", _fmt3(fit.model_frequencies, MHz) + " MHz")]
    return report, _kv_text("V_RF fit", items), {}


def cmd_crystal(ctx: Context, args):
    sec = _section(ctx.config, "crystal")
    n = args.n_ions if args.n_ions is not None else sec.get("n_ions", 2)
    kind = args.model or sec.get("model", "harmonic")
    rng = np.random.default_rng(ctx.seed)
    freqs = sec.get("frequencies_hz")
    if kind == "full":
        ep = ctx.potential()
        c = characterize(ep, depth=False)
        model = TrapModel(ep, c.r0)
    elif freqs is None:
        ep = ctx.potential()
        c = characterize(ep, depth=False)
        model = HarmonicModel(tuple(c.frequencies), c.modes.axes, c.r0)
    else:
        model = HarmonicModel(tuple(freqs))
    cfg = equilibrium(model, n, ctx.ion, rng=rng, restarts=sec.get("restarts", 0))
    report = {"n_ions": n, "model": cfg.model, "frequencies_hz": list(model.frequencies),
              "positions_um": cfg.positions / um, "energy_J": cfg.energy,
              "grad_norm_N": cfg.grad_norm, "transverse_extent_um": cfg.transverse_extent / um,
              "zigzag": cfg.is_zigzag, "seed": ctx.seed}
    items = [("ions", n), ("model", cfg.model),
             ("transverse extent", f"{cfg.transverse_extent / um:.4f} um"),
             ("configuration", "zig-zag" if cfg.is_zigzag else "linear")]
    n_range = sec.get("n_range")
    if n_range is not None and kind == "harmonic":
        try:
            zz = zigzag_analysis(model.frequencies, ctx.ion, tuple(n_range))
            report["n_crit"] = zz.n_crit
            report["zigzag_plane"] = zz.soft_axis
            items.append(("first zig-zag N", zz.n_crit))
        except RangeExhausted:
            report["n_crit"] = None
            items.append(("first zig-zag N", f"none in {tuple(n_range)}"))
    rows = [(i, *(p / um)) for i, p in enumerate(cfg.positions)]
    return report, _kv_text("ion crystal", items), {"crystal.csv": _csv_text(CRYSTAL_HEADER, rows)}


def _load_report(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read characterization report {path}: {exc}") from exc


def cmd_heating(ctx: Context, args):
    sec = dict(_section(ctx.config, "heating"))
    rep_path = args.report or sec.get("characterization_report")
    r0 = axis = None
    if rep_path:
        rep = _load_report(rep_path)
        try:
            sec["U_T_meV"] = rep["U_T_meV"]
            sec["f_perp1_hz"] = rep["f_perp1_MHz"] * MHz
            r0 = np.asarray(rep["r0_um"], float) * um
            axis = np.asarray(rep["mode_axes"][1], float)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"characterization report lacks {exc}") from exc
    for flag, key in (("U_T_meV", "U_T_meV"), ("tau_s", "tau_s_s"), ("f_hz", "f_perp1_hz")):
        v = getattr(args, flag)
        if v is not None:
            sec[key] = v
    missing = [k for k in ("U_T_meV", "tau_s_s", "f_perp1_hz") if sec.get(k) is None]
    if missing:
        raise ConfigError(f"heating: missing {', '.join(missing)}")
    est = escape_heating_rate(sec["U_T_meV"] * meV, sec["tau_s_s"], sec["f_perp1_hz"],
                              sec.get("sigma_U_meV", 0.0) * meV, sec.get("sigma_tau_s", 0.0))
    report = {"escape": {"rate_per_s": est.rate, "sigma_per_s": est.sigma_rate,
                         "rate_per_ms": est.rate / 1e3, "U_T_meV": sec["U_T_meV"],
                         "tau_s": sec["tau_s_s"], "f_hz": sec["f_perp1_hz"]}}
    items = [("escape estimate", f"{est.rate / 1e3:.3f} +/- {est.sigma_rate / 1e3:.3f} quanta/ms")]

    if "R_ohm" in sec:
        if r0 is None:
            _, c, _, _ = _characterization(ctx, depth=False)
            r0, axis = c.r0, c.modes.axes[1]
        f_j = sec.get("johnson_f_hz", sec["f_perp1_hz"])
        johnson = {}
        for label, ax in (("field_magnitude", None), ("mode_projected", axis)):
            d = {n: effective_distance(ctx.model, n, r0, axis=ax) for n in ctx.layout.control_names}
            noise = FilterNoiseModel(sec["R_ohm"], sec["C_farad"], sec["T_kelvin"], d, f_j)
            total, per = johnson_heating_rate(noise, ctx.ion, per_electrode=True)
            johnson[label] = {"total_per_s": total, "per_electrode_per_s": per,
                              "d_eff_um": {k: v / um for k, v in d.items()}}
            items.append((f"Johnson ({label.replace('_', ' ')})", f"{total:.3g} quanta/s"))
        report["johnson"] = johnson
        report["johnson_r0_um"] = r0 / um
        report["johnson_mode_axis"] = axis
    return report, _kv_text("heating estimates", items), {}


def cmd_table(ctx: Context, args):
    sec = _section(ctx.config, "table")
    st = ctx.config.section("statics")
    if "ratios" not in st:
        raise ConfigError("statics: table needs ratios with scale_volts")
    configs = [(r["scale_volts"], r["vrf_volts"]) for r in sec["rows"]]
    depth = sec.get("depth", True) and not args.no_depth
    rows = predict_table(ctx.layout, configs, ctx.ion, ctx.drive.omega, st["ratios"],
                         model=ctx.model, depth=depth, depth_spacing=ctx.depth_spacing)
    report = {"rows": [r.as_dict() for r in rows]}
    return report, "Predicted trap parameters\n" + format_table(rows) + "\n", {}


HANDLERS = {"validate": cmd_validate, "fieldmap": cmd_fieldmap, "characterize": cmd_characterize,
            "compensate": cmd_compensate, "fit-vrf": cmd_fit_vrf, "crystal": cmd_crystal,
            "heating": cmd_heating, "table": cmd_table}


# --------------------------------------------------------------------------
# entry points
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="surftrap", description="Surface-electrode trap modelling.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON); default: bundled reference")
    common.add_argument("--out", help="output directory (default: output.dir or ./out)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--threads", type=int, help="limit BLAS/OpenMP threads")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    sub.add_parser("validate", parents=[common], help="check the electrode layout")
    f = sub.add_parser("fieldmap", parents=[common], help="CSV grid of fields on a plane")
    f.add_argument("--normal", choices=("x", "y", "z"))
    f.add_argument("--offset-um", type=float)
    f.add_argument("--resolution", type=int, nargs=2, metavar=("NU", "NV"))
    c = sub.add_parser("characterize", parents=[common], help="minimum, modes, depth, micromotion")
    c.add_argument("--no-depth", action="store_true", help="skip the depth search")
    k = sub.add_parser("compensate", parents=[common], help="solve control voltages")
    k.add_argument("--f-axial-hz", type=float)
    sub.add_parser("fit-vrf", parents=[common], help="fit V_RF to measured frequencies")
    x = sub.add_parser("crystal", parents=[common], help="ion crystal equilibrium")
    x.add_argument("--n-ions", type=int)
    x.add_argument("--model", choices=("harmonic", "full"))
    h = sub.add_parser("heating", parents=[common], help="heating-rate estimates")
    h.add_argument("--report", help="characterize.json to take U_T, f and r0 from")
    h.add_argument("--U-T-meV", dest="U_T_meV", type=float)
    h.add_argument("--tau-s", dest="tau_s", type=float)
    h.add_argument("--f-hz", dest="f_hz", type=float)
    t = sub.add_parser("table", parents=[common], help="frequencies and depths for several drives")
    t.add_argument("--no-depth", action="store_true")
    return p


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig.from_dict(reference_config())
    return RunConfig.load(path)


def run(command: str, config: RunConfig, args=None, out_dir=None, seed: int = 0):
    """Run one subcommand and write its outputs.

    Returns
    -------
    report : dict
        The machine-readable report (also written as ``<command>.json``).
    """
    if args is None:
        args = build_parser().parse_args([command])
    ctx = Context(config, seed)
    report, text, extra = HANDLERS[command](ctx, args)
    report = {"command": command, **report}
    out_dir = out_dir or (config.section("output") or {}).get("dir", "out")
    write_atomic(os.path.join(out_dir, f"{command}.json"), dumps(report))
    write_atomic(os.path.join(out_dir, f"{command}.txt"), text)
    for name, content in extra.items():
        write_atomic(os.path.join(out_dir, name), content)
    return _plain(report), text


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.seed < 0 or args.seed >= 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if args.threads is not None:
        from threadpoolctl import threadpool_limits
        limiter = threadpool_limits(limits=max(1, args.threads))
    else:
        limiter = nullcontext()
    try:
        with limiter:
            config = load_config(args.config)
            _, text = run(args.command, config, args, args.out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TrapError as exc:
        print(exc.qualified(), file=sys.stderr)
        return 1
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
