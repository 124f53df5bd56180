"""Batch CLI: bands | dirac | field | envelope | compare.

Every command reads a YAML config (or a previous run's manifest), writes
CSV/JSON outputs with fixed headers and %.12e numerics into --out, and
emits a manifest from which the run can be reproduced bit-identically.

Exit codes: 0 success, 1 config error, 2 numeric failure.
"""

import os

# Pin BLAS threading before numpy loads: run outputs must not depend on
# ambient thread pools (--threads parallelism uses worker processes).
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import hashlib
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from bubblebands import __version__
from bubblebands.config import ConfigError, RunConfig, load_config, manifest_dict

EXIT_CONFIG = 1
EXIT_NUMERIC = 2


# ----------------------------------------------------------------------
# output helpers


def _fmt(x) -> str:
    return "%.12e" % x


def write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, (int, float, np.floating))
                              else str(v) for v in row) + "\n")


_SCHEMA = None


def _schema():
    global _SCHEMA
    if _SCHEMA is None:
        with resources.files("bubblebands.schemas").joinpath(
                "outputs.schema.json").open() as fh:
            _SCHEMA = json.load(fh)
    return _SCHEMA


def validate_json(doc: dict, kind: str):
    import jsonschema

    schema = dict(_schema())
    schema["$ref"] = f"#/definitions/{kind}"
    jsonschema.validate(doc, schema)


def write_json(path: Path, doc: dict, kind: str):
    validate_json(doc, kind)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(outdir: Path, config: RunConfig, command: str, threads: int,
                   files):
    outputs = {f.name: _sha256(f) for f in files}
    doc = manifest_dict(config, command, threads, outputs)
    validate_json(doc, "manifest")
    path = outdir / "manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _cpair(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


# ----------------------------------------------------------------------
# shared computations


def _dirac_report(config: RunConfig, threads: int) -> dict:
    from bubblebands import spectral as sp

    basis = config.basis()
    mat = config.material
    dd = sp.dirac_velocity(basis, mat,
                           h_rel=float(config.raw["dirac"]["fd_step_rel"]))
    radii = [float(r) for r in config.raw["dirac"]["fit_radii_rel"]]
    ndir = int(config.raw["dirac"]["n_directions"])
    directions = [np.pi * 2.0 * j / ndir for j in range(ndir)]
    bp_star = sp.solve_bands_at(basis, mat, dd.alpha_star, tol=config.solver_tol)
    om_star = float(bp_star.omegas[-1])
    ts, lower, upper = sp.cone_scan(basis, mat, radii_rel=radii,
                                    directions=directions, tol=config.solver_tol,
                                    workers=threads)
    slopes_p, slopes_m, r2s = [], [], []
    for i in range(len(directions)):
        fit = sp.dirac_fit(ts, lower[i], upper[i], omega_star=om_star)
        slopes_p.append(fit.slope_plus)
        slopes_m.append(fit.slope_minus)
        r2s.extend([fit.r2_plus, fit.r2_minus])
    mean_slopes = 0.5 * (np.array(slopes_p) + np.array(slopes_m))
    iso = float((mean_slopes.max() - mean_slopes.min()) / mean_slopes.mean())
    return {
        "schema_version": 1,
        "lattice_kind": config.raw["lattice"]["kind"],
        "alpha_star": [float(v) for v in dd.alpha_star],
        "omega_star_numeric": om_star,
        "omega_star_asymptotic": dd.omega_star,
        "c1_star": dd.c1_star,
        "c2_over_c1": 0.0,
        "c_dirac": _cpair(dd.c_dirac),
        "lambda0": dd.lambda0,
        "slope_formula": dd.slope,
        "slopes_plus": [float(s) for s in slopes_p],
        "slopes_minus": [float(s) for s in slopes_m],
        "isotropy_spread": iso,
        "fit_r2_min": float(min(r2s)),
        "gradient_pattern_dev": dd.pattern_dev,
        "grad_c1_rel": dd.grad_c1_rel,
        "seed_offset": float(sp.seed_offset_at_cone(basis, mat,
                                                    tol=config.solver_tol)),
        "directions": [float(d) for d in directions],
        "fit_radii_rel": radii,
    }


def _envelope_report(config: RunConfig, threads: int):
    from bubblebands import homogenize as hm
    from bubblebands import spectral as sp

    basis = config.basis()
    mat = config.material
    solver = sp.DispersionSolver(basis, mat, tol=config.solver_tol)
    eps = config.envelope_epsilons()
    sec = config.raw["envelope"]
    curve = hm.f_curve(solver, eps,
                       fft_epsilons=[float(e) for e in sec["fft_epsilons"]],
                       n_cells=int(sec["n_cells"]),
                       samples_per_cell=int(sec["samples_per_cell"]))
    kind = config.raw["lattice"]["kind"]
    report = {
        "schema_version": 1,
        "lattice_kind": kind,
        "omega_star": curve.omega_star,
        "fit_model": curve.fit.model,
        "fit_coefficient": curve.fit.coefficient,
        "fit_intercept": curve.fit.intercept,
        "fit_r2": curve.fit.r2,
        "slope_formula": None,
        "ratio_spread": None,
    }
    if kind == "honeycomb":
        dd = sp.dirac_velocity(basis, mat)
        report["slope_formula"] = float(
            1.0 / (2.0 * np.pi * abs(dd.c_dirac) * dd.lambda0
                   * np.sqrt(mat.delta)))
    else:
        good = ~np.isnan(curve.f)
        ratio = curve.f[good] / np.sqrt(curve.epsilons[good])
        report["ratio_spread"] = float(np.max(np.abs(ratio - ratio.mean()))
                                       / ratio.mean())
    return curve, report


# ----------------------------------------------------------------------
# commands


def cmd_bands(config: RunConfig, outdir: Path, threads: int) -> int:
    from bubblebands import homogenize as hm
    from bubblebands import spectral as sp
    from bubblebands.lattice import bz_path, dirac_point

    basis = config.basis()
    mat = config.material
    lat = config.lattice
    path = bz_path(lat, config.waypoints(),
                   int(config.raw["bands"]["n_per_segment"]))
    bs = sp.band_sweep(basis, mat, path.points, arclength=path.arclength,
                       tol=config.solver_tol, workers=threads)

    nb = basis.dimer.n_bubbles
    rows = []
    for i in range(bs.path.shape[0]):
        om = bs.omegas[i]
        res = bs.residuals[i]
        asym = bs.omegas_asym[i]
        rows.append([
            bs.arclength[i], bs.path[i, 0], bs.path[i, 1],
            om[0], om[-1] if nb == 2 else np.nan,
            res[0], res[-1] if nb == 2 else np.nan,
            asym[0], asym[-1] if nb == 2 else np.nan,
        ])
    csv_path = outdir / "bands.csv"
    write_csv(csv_path, ["arclength", "alpha_x", "alpha_y", "omega1", "omega2",
                         "residual1", "residual2", "omega1_asym", "omega2_asym"],
              rows)

    report = {
        "schema_version": 1,
        "lattice_kind": config.raw["lattice"]["kind"],
        "n_points": int(bs.path.shape[0]),
        "n_failed": bs.n_failed,
        "waypoint_arclength": [float(path.arclength[i])
                               for i in path.waypoint_index],
    }
    astar = dirac_point(lat)
    on_cone = np.min(np.linalg.norm(bs.path - astar, axis=1)) < 1e-9
    if nb == 2 and on_cone:
        report["dirac"] = _dirac_report(config, threads)
    if nb == 1:
        solver = sp.DispersionSolver(basis, mat, tol=config.solver_tol)
        solver._points[tuple(np.round(astar, 14))] = sp.solve_bands_at(
            basis, mat, astar, tol=config.solver_tol)
        gap = True
        for probe in (2e-3, 6e-3):
            try:
                hm.envelope_frequency_dispersion(solver, probe, (1.0, 0.0))
                gap = False
            except hm.NoModeError:
                pass
        report["bandgap_above_first_band"] = gap
    json_path = outdir / "bands.json"
    write_json(json_path, report, "bands_report")
    write_manifest(outdir, config, "bands", threads, [csv_path, json_path])
    if bs.n_failed > 0.05 * bs.path.shape[0]:
        print(f"bands: {bs.n_failed}/{bs.path.shape[0]} points failed",
              file=sys.stderr)
        return EXIT_NUMERIC
    return 0


def cmd_dirac(config: RunConfig, outdir: Path, threads: int) -> int:
    report = _dirac_report(config, threads)
    json_path = outdir / "dirac.json"
    write_json(json_path, report, "dirac_report")
    write_manifest(outdir, config, "dirac", threads, [json_path])
    return 0


def cmd_field(config: RunConfig, outdir: Path, threads: int,
              epsilon: float | None = None, band: str | None = None) -> int:
    from bubblebands import fields as fl
    from bubblebands import homogenize as hm
    from bubblebands import spectral as sp
    from bubblebands.lattice import LatticeKind, dirac_point

    basis = config.basis()
    mat = config.material
    lat = config.lattice
    sec = config.raw["field"]
    eps = float(sec["epsilon"] if epsilon is None else epsilon)
    band_name = str(sec["band"] if band is None else band).lower()
    if band_name not in ("lower", "upper"):
        raise ConfigError(f"band must be lower or upper, got {band_name!r}")

    solver = sp.DispersionSolver(basis, mat, tol=config.solver_tol)
    shift = eps if band_name == "upper" else -eps
    if basis.dimer.n_bubbles == 1:
        shift = -abs(eps)
    f = hm.envelope_frequency_dispersion(solver, shift, (1.0, 0.0))
    astar = dirac_point(lat)
    alpha = astar + 2.0 * np.pi * f * np.array([1.0, 0.0])
    branch = 0 if (shift < 0 or basis.dimer.n_bubbles == 1) else 1
    omega = solver.band(alpha, branch)
    dens = fl.kernel_densities(basis, mat, alpha, omega)

    report = {
        "schema_version": 1,
        "lattice_kind": config.raw["lattice"]["kind"],
        "alpha": [float(v) for v in alpha],
        "omega": float(omega),
        "epsilon": eps,
        "band": band_name,
        "sigma_ratio": dens.sigma_ratio,
    }
    if basis.dimer.n_bubbles == 2:
        psis = sp.solve_psi(basis, alpha)
        cp = fl.project_coeffs(dens, psis[0], psis[1], basis.weights)
        report["coeff_A"] = _cpair(cp.A)
        report["coeff_B"] = _cpair(cp.B)
        report["coeff_residual"] = cp.residual

    ncell = int(sec["region_cells"])
    resolution = int(sec["resolution"])
    xper = float((lat.l1 + lat.l2)[0]) if lat.kind is LatticeKind.HONEYCOMB \
        else float(lat.L)
    region = (0.0, ncell * xper, -0.5 * ncell * lat.L, 0.5 * ncell * lat.L)
    fg = fl.eval_field(basis, mat, dens, region, resolution)
    rows = [[fg.points[i, 0], fg.points[i, 1], fg.values[i].real,
             fg.values[i].imag, int(fg.inside_mask[i])]
            for i in range(fg.points.shape[0])]
    csv_path = outdir / "field.csv"
    write_csv(csv_path, ["x", "y", "re_u", "im_u", "inside"], rows)

    pts, vals, period = hm.sample_line(solver, dens,
                                       n_cells=int(sec["line_cells"]),
                                       samples_per_cell=int(sec["samples_per_cell"]))
    inside, _, _ = fl.classify_points(basis, pts)
    line_rows = [[pts[i, 0], vals[i].real, vals[i].imag, int(inside[i])]
                 for i in range(pts.shape[0])]
    line_path = outdir / "field_line.csv"
    write_csv(line_path, ["x", "re_u", "im_u", "inside"], line_rows)

    json_path = outdir / "field.json"
    write_json(json_path, report, "field_report")
    write_manifest(outdir, config, "field", threads,
                   [csv_path, line_path, json_path])
    return 0


def _envelope_outputs(config: RunConfig, outdir: Path, threads: int,
                      prefix: str = "envelope"):
    curve, report = _envelope_report(config, threads)
    rows = [[e, f, ff] for e, f, ff in zip(curve.epsilons, curve.f, curve.f_fft)]
    csv_path = outdir / f"{prefix}.csv"
    write_csv(csv_path, ["epsilon", "f_dispersion", "f_fft"], rows)
    json_path = outdir / f"{prefix}.json"
    write_json(json_path, report, "envelope_report")
    return curve, report, [csv_path, json_path]


def cmd_envelope(config: RunConfig, outdir: Path, threads: int) -> int:
    curve, report, files = _envelope_outputs(config, outdir, threads)
    write_manifest(outdir, config, "envelope", threads, files)
    if np.all(np.isnan(curve.f)):
        print("envelope: no epsilon resolved to a mode", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


def cmd_compare(config: RunConfig, outdir: Path, threads: int) -> int:
    reports = {}
    files = []
    for kind in ("honeycomb", "square"):
        sub_raw = json.loads(json.dumps(config.raw))
        sub_raw["lattice"]["kind"] = kind
        if kind == "square":
            sub_raw["envelope"]["epsilons"] = [1.0e-3, 2.0e-3, 3.0e-3, 5.0e-3,
                                               7.0e-3, 8.5e-3, 1.0e-2]
        else:
            sub_raw["envelope"]["epsilons"] = [float(e) for e in
                                               RunConfig(sub_raw).envelope_epsilons()]
        sub = RunConfig(raw=sub_raw)
        curve, report, out = _envelope_outputs(sub, outdir, threads,
                                               prefix=f"envelope_{kind}")
        reports[kind] = (curve, report)
        files.extend(out)

    def spreads(curve):
        good = ~np.isnan(curve.f)
        eps = np.abs(curve.epsilons[good])
        f = curve.f[good]
        rl = f / eps
        rs = f / np.sqrt(eps)
        return (float(np.max(np.abs(rl - rl.mean())) / rl.mean()),
                float(np.max(np.abs(rs - rs.mean())) / rs.mean()))

    h_lin, h_sqrt = spreads(reports["honeycomb"][0])
    s_lin, s_sqrt = spreads(reports["square"][0])
    doc = {
        "schema_version": 1,
        "honeycomb": reports["honeycomb"][1],
        "square": reports["square"][1],
        "mutual_exclusion": {
            "honeycomb_linear_spread": h_lin,
            "honeycomb_sqrt_spread": h_sqrt,
            "square_linear_spread": s_lin,
            "square_sqrt_spread": s_sqrt,
            "exclusive": bool(h_lin < h_sqrt and s_sqrt < s_lin),
        },
    }
    json_path = outdir / "compare.json"
    write_json(json_path, doc, "compare_report")
    files.append(json_path)
    write_manifest(outdir, config, "compare", threads, files)
    return 0


# ----------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bubblebands",
        description="Sub-wavelength band structures and near-zero-index "
                    "envelopes of 2D bubbly phononic crystals")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "bands": "band structure along a Brillouin-zone path",
        "dirac": "Dirac point report: velocity, slope, isotropy",
        "field": "Bloch eigenfunction grid and line cut",
        "envelope": "envelope spatial-frequency law f(epsilon)",
        "compare": "honeycomb vs square envelope laws",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None,
                       help="YAML config or a previous run's manifest.json")
        p.add_argument("--out", type=str, default="out",
                       help="output directory (created if missing)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None,
                       help="recorded in the manifest; overrides the config")
        if name == "field":
            p.add_argument("--epsilon", type=float, default=None)
            p.add_argument("--band", type=str, default=None,
                           choices=["lower", "upper"])

    args = parser.parse_args(argv)
    try:
        overrides = {"seed": args.seed} if args.seed is not None else None
        config = load_config(args.config, overrides)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    threads = max(1, args.threads)
    try:
        if args.command == "bands":
            return cmd_bands(config, outdir, threads)
        if args.command == "dirac":
            return cmd_dirac(config, outdir, threads)
        if args.command == "field":
            return cmd_field(config, outdir, threads,
                             epsilon=args.epsilon, band=args.band)
        if args.command == "envelope":
            return cmd_envelope(config, outdir, threads)
        if args.command == "compare":
            return cmd_compare(config, outdir, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
