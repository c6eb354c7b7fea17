"""Command-line driver: ``bladeas <subcommand> [options]``.

Exit codes: 0 success, 1 domain error (message on stderr), 2 usage error.
The default output directory comes from ``$BLADEAS_OUTPUT_DIR`` (else ``.``).
"""
from __future__ import annotations

import argparse
import configparser
import os
import sys
import warnings
from pathlib import Path

from .errors import BladeASError
from .evaluation import OperatingPoint
from .pipeline import (BaselineSpec, OptimizeOptions, analyze_step, build_step, evaluate_step,
                       fit_baseline_step, ingest_step, optimize_step, sample_step)

ENV_OUTPUT_DIR = "BLADEAS_OUTPUT_DIR"

FORMATS_HELP = """\
file formats:
  designs.csv    header mu_1..mu_m, one design per row; sidecar designs.csv.meta
                 holds '# key: value' lines (seed, method, bounds, baseline hash)
  dataset.csv    '# key: value' metadata lines, then header mu_1..mu_m,kt,eta,pmax,fmax
  ingest input   same layout as dataset.csv; metadata lines optional
  eigenvalues.csv        index,<output>...,shared
  eigenvector_<o>.csv    index,label,weight (first eigenvector)
  subspace_<o>.csv       eigenvalues on line 1, then the m x m matrix W by rows
  rs_<o>.csv             mu_M,<output>,set,fit   (set is train or validation)
  optimal_pitch.csv, optimal_camber.csv   r_over_R,baseline,optimal
  design_NNNN.stl        binary STL; design_NNNN.csv blade_id,i,j,x,y,z
"""


def _default_out() -> str:
    return os.environ.get(ENV_OUTPUT_DIR, ".")


def _rows(text: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"rows must be comma-separated integers: {text!r}")


def _dim(text: str):
    if text == "auto":
        return "auto"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}")


def _add_baseline(p):
    p.add_argument("--baseline", help="baseline table (default: bundled blade)")
    p.add_argument("--diameter", type=float, default=0.25, help="propeller diameter [m]")
    p.add_argument("--blades", type=int, default=5, help="number of blades")


def _add_operating(p):
    p.add_argument("--va", type=float, help="advance speed [m/s]")
    p.add_argument("-J", "--advance-ratio", type=float, default=1.019)
    p.add_argument("--rps", type=float, default=20.0, help="shaft speed [rev/s]")
    p.add_argument("--rho", type=float, default=1025.0, help="water density [kg/m^3]")
    p.add_argument("--stations", type=int, default=30, help="BEM radial stations")


def _baseline(a) -> BaselineSpec:
    return BaselineSpec(a.baseline, a.diameter, a.blades)


def _operating(a) -> OperatingPoint:
    if a.va is not None:
        return OperatingPoint(a.va, a.rps, a.diameter, a.rho)
    return OperatingPoint.from_advance_ratio(a.advance_ratio, a.rps, a.diameter, a.rho)


def _options(a) -> OptimizeOptions:
    return OptimizeOptions(objective=a.objective,
                           degree=None if a.degree == "auto" else a.degree,
                           train_fraction=a.train_fraction, split_seed=a.split_seed,
                           kt_tolerance=a.kt_tolerance, eta_constraint=not a.no_eta_constraint,
                           n_grid=a.n_grid)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bladeas", description="Propeller blade design-space analysis pipeline.",
        epilog=FORMATS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    p = sub.add_parser("fit-baseline", help="fit B-spline curves to the baseline table")
    _add_baseline(p)
    p.add_argument("-m", type=int, default=20, help="design dimension (2 x control points)")
    p.add_argument("-o", "--out", default=None, help="output directory")

    p = sub.add_parser("sample", help="draw smooth designs in [-1, 1]^m")
    _add_baseline(p)
    p.add_argument("-n", type=int, default=1100, help="number of designs")
    p.add_argument("-m", type=int, default=20, help="design dimension")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--method", choices=("auto", "rejection", "hit-and-run"), default="auto")
    p.add_argument("-o", "--out", required=True, help="designs CSV")

    p = sub.add_parser("build", help="export blade surfaces for selected designs")
    _add_baseline(p)
    p.add_argument("--designs", required=True)
    p.add_argument("--rows", type=_rows, default=None, help="design rows, e.g. 0,5,7")
    p.add_argument("--format", choices=("stl", "grid-csv"), default="stl")
    p.add_argument("--airfoil", help="section file x,camber,half_thickness (default NACA 2412)")
    p.add_argument("--n-radial", type=int, default=30)
    p.add_argument("--section-points", type=int, default=40)
    p.add_argument("--single-blade", action="store_true", help="export one blade only")
    p.add_argument("-o", "--out", default=None, help="output directory")

    p = sub.add_parser("evaluate", help="run the BEM surrogate on a designs file")
    _add_baseline(p)
    _add_operating(p)
    p.add_argument("--designs", required=True)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("-o", "--out", required=True, help="dataset CSV")

    p = sub.add_parser("ingest", help="validate external solver results into a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("-m", type=int, default=None, help="expected design dimension")
    p.add_argument("-o", "--out", required=True, help="dataset CSV")

    p = sub.add_parser("analyze", help="active subspaces per output and shared")
    _add_analyze(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("-o", "--out", default=None, help="output directory")

    p = sub.add_parser("optimize", help="response surfaces and constrained optimum")
    _add_baseline(p)
    _add_operating(p)
    _add_optimize(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--subspace", required=True, help="shared subspace CSV")
    p.add_argument("-o", "--out", default=None, help="output directory")

    p = sub.add_parser("pipeline", help="run every step from a config file")
    p.add_argument("--config", required=True, help="flat 'key = value' file")
    p.add_argument("-o", "--out", default=None, help="output directory (overrides config)")
    return parser


def _add_analyze(p):
    p.add_argument("--gradient-method", choices=("local-linear", "global-linear"),
                   default="local-linear")
    p.add_argument("--k-neighbors", type=int, default=None)
    p.add_argument("--active-dim", type=_dim, default="auto")


def _add_optimize(p):
    p.add_argument("--objective", choices=("kt", "eta", "pmax", "fmax"), default="pmax")
    p.add_argument("--degree", type=_dim, default=4, help="polynomial degree or auto")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--kt-tolerance", type=float, default=0.01,
                   help="relative K_T band around the baseline")
    p.add_argument("--no-eta-constraint", action="store_true")
    p.add_argument("--n-grid", type=int, default=2001)


# config keys and their types; defaults mirror the subcommand flags
CONFIG_KEYS = {
    "baseline": str, "airfoil": str, "output_dir": str, "diameter": float, "blades": int,
    "m": int, "n_samples": int, "seed": int, "sampling_method": str,
    "va": float, "advance_ratio": float, "rps": float, "rho": float, "stations": int,
    "jobs": int, "gradient_method": str, "k_neighbors": int, "active_dim": _dim,
    "objective": str, "degree": _dim, "train_fraction": float, "split_seed": int,
    "kt_tolerance": float, "eta_constraint": str, "n_grid": int,
    "build_rows": _rows, "build_format": str,
}


def load_config(path) -> dict:
    """Parse a flat ``key = value`` file ('#' comments allowed)."""
    path = Path(path)
    if not path.is_file():
        raise BladeASError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string("[config]\n" + path.read_text(encoding="utf-8"))
    except configparser.Error as exc:
        raise BladeASError(f"config {path}: {exc}") from None
    out = {}
    for key, raw in cp["config"].items():
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise BladeASError(f"config {path}: unknown key {key!r}")
        value = raw.strip().strip('"').strip("'")
        try:
            out[key] = CONFIG_KEYS[key](value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise BladeASError(f"config {path}: bad value for {key}: {exc}") from None
    for key in ("baseline", "airfoil"):
        if key in out and not Path(out[key]).is_file():
            raise BladeASError(f"config {path}: {key} file not found: {out[key]}")
    if "seed" not in out:
        raise BladeASError(f"config {path}: 'seed' is required")
    return out


def run_pipeline(cfg: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    baseline = BaselineSpec(cfg.get("baseline"), cfg.get("diameter", 0.25), cfg.get("blades", 5))
    m = cfg.get("m", 20)
    designs = out_dir / "designs.csv"
    dataset = out_dir / "dataset.csv"
    if "va" in cfg:
        op = OperatingPoint(cfg["va"], cfg.get("rps", 20.0), baseline.diameter,
                            cfg.get("rho", 1025.0))
    else:
        op = OperatingPoint.from_advance_ratio(cfg.get("advance_ratio", 1.019),
                                               cfg.get("rps", 20.0), baseline.diameter,
                                               cfg.get("rho", 1025.0))
    stations = cfg.get("stations", 30)
    fit_baseline_step(baseline, out_dir / "baseline", m)
    sample_step(baseline, cfg.get("n_samples", 1100), m, cfg["seed"], designs,
                cfg.get("sampling_method", "auto"))
    evaluate_step(baseline, designs, dataset, op, stations, cfg.get("jobs", 1))
    if "build_rows" in cfg:
        build_step(baseline, designs, out_dir / "geometry", cfg["build_rows"],
                   cfg.get("build_format", "stl"), airfoil=cfg.get("airfoil"))
    analyze_step(dataset, out_dir / "analysis", cfg.get("gradient_method", "local-linear"),
                 cfg.get("k_neighbors"), cfg.get("active_dim", "auto"))
    eta = str(cfg.get("eta_constraint", "true")).lower() in ("1", "true", "yes", "on")
    degree = cfg.get("degree", 4)
    options = OptimizeOptions(cfg.get("objective", "pmax"),
                              None if degree == "auto" else degree,
                              cfg.get("train_fraction", 0.8), cfg.get("split_seed", 0),
                              cfg.get("kt_tolerance", 0.01), eta, cfg.get("n_grid", 2001))
    optimize_step(dataset, out_dir / "analysis" / "subspace_shared.csv",
                  out_dir / "optimization", baseline, options, op, stations)


def _dispatch(a) -> None:
    cmd = a.command
    out = getattr(a, "out", None)
    if cmd == "fit-baseline":
        fit_baseline_step(_baseline(a), out or _default_out(), a.m)
    elif cmd == "sample":
        sample_step(_baseline(a), a.n, a.m, a.seed, a.out, a.method)
    elif cmd == "build":
        written = build_step(_baseline(a), a.designs, out or _default_out(), a.rows, a.format,
                             a.n_radial, a.airfoil, a.section_points, not a.single_blade)
        print(f"wrote {len(written)} file(s)")
    elif cmd == "evaluate":
        evaluate_step(_baseline(a), a.designs, a.out, _operating(a), a.stations, a.jobs)
    elif cmd == "ingest":
        ingest_step(a.input, a.out, a.m)
    elif cmd == "analyze":
        analyze_step(a.dataset, out or _default_out(), a.gradient_method, a.k_neighbors,
                     a.active_dim)
    elif cmd == "optimize":
        optimize_step(a.dataset, a.subspace, out or _default_out(), _baseline(a),
                      _options(a), _operating(a), a.stations)
    elif cmd == "pipeline":
        cfg = load_config(a.config)
        run_pipeline(cfg, Path(out or cfg.get("output_dir") or _default_out()))


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            _dispatch(args)
    except (BladeASError, ValueError, OSError) as exc:
        print(f"bladeas {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
