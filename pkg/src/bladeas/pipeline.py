"""Batch steps shared by the command-line subcommands.

Each step reads and writes plain files so that running the steps one by one
produces exactly what the ``pipeline`` subcommand produces.
"""
from __future__ import annotations

import csv
import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .airfoil import naca4_section, read_section
from .evaluation import (OUTPUT_NAMES, Dataset, OperatingPoint, bem_evaluate,
                         ingest_results, read_designs, write_dataset, write_designs)
from .export import write_grid_csv, write_stl
from .geometry import (CURVE_NAMES, bundled_baseline_path, fit_distributions, loft_blade,
                       read_baseline_table, replicate_propeller)
from .parameterization import ParameterSpace, apply_parameters, sample_designs
from .response import (Constraint, constrained_optimize, fit_response_surface,
                       select_degree, sensitivity_table)
from .subspace import (compute_active_subspace, estimate_gradients, gradient_covariance,
                       project, read_subspace, shared_subspace, write_eigenvector_bars,
                       write_subspace)


def _g(v) -> str:
    return format(float(v), ".17g")


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class BaselineSpec:
    path: str | None = None
    diameter: float = 0.25
    n_blades: int = 5

    @property
    def resolved(self) -> Path:
        return Path(self.path) if self.path else bundled_baseline_path()

    def space(self, m: int = 20) -> ParameterSpace:
        if m % 2 or m < 8:
            raise ValueError(f"m must be an even number >= 8, got {m}")
        dist = fit_distributions(read_baseline_table(self.resolved), self.diameter,
                                 self.n_blades, n_ctrl=m // 2)
        return ParameterSpace.default(dist, m)


def fit_baseline_step(baseline: BaselineSpec, out_dir, m: int = 20) -> None:
    out = Path(out_dir)
    (out / "curves").mkdir(parents=True, exist_ok=True)
    table = read_baseline_table(baseline.resolved)
    dist = baseline.space(m).baseline
    for name, curve in dist.curves().items():
        (out / "curves" / f"{name}.txt").write_text(curve.to_text(), encoding="utf-8")
    D = baseline.diameter
    data = {"chord": table.chord_D * D, "pitch": table.pitch_D * D, "skew": table.skew_D * D,
            "rake": table.rake_D * D, "max_camber": table.max_camber}
    with open(out / "baseline_fit.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r_over_R"] + [f"{n}_{k}" for n in CURVE_NAMES for k in ("data", "spline")])
        fitted = dist.sample(table.r_over_R)
        for i, r in enumerate(table.r_over_R):
            row = [_g(r)]
            for n in CURVE_NAMES:
                row += [_g(data[n][i]), _g(fitted[n][i])]
            w.writerow(row)
    with open(out / "control_points.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index"] + list(CURVE_NAMES))
        for i in range(dist.pitch.n_ctrl):
            w.writerow([i + 1] + [_g(dist.curves()[n].control_points[i]) for n in CURVE_NAMES])


def sample_step(baseline: BaselineSpec, n: int, m: int, seed: int, out_path,
                method: str = "auto") -> None:
    space = baseline.space(m)
    batch = sample_designs(space, n, seed, method=method)
    meta = {
        "seed": seed,
        "method": batch.method,
        "redraws": batch.redraws,
        "pitch_bound": _g(space.pitch_bound),
        "camber_bound": _g(space.camber_bound),
        "baseline_file_sha256": file_hash(baseline.resolved),
        "diameter": _g(baseline.diameter),
        "n_blades": baseline.n_blades,
    }
    write_designs(batch.mu, out_path, meta)


def _section(airfoil, n_points):
    return read_section(airfoil) if airfoil else naca4_section("2412", n_points)


def build_step(baseline: BaselineSpec, designs_path, out_dir, rows=None, fmt: str = "stl",
               n_radial: int = 30, airfoil=None, section_points: int = 40,
               all_blades: bool = True) -> list[Path]:
    mu, _ = read_designs(designs_path)
    space = baseline.space(mu.shape[1])
    section = _section(airfoil, section_points)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = range(mu.shape[0]) if rows is None else rows
    written = []
    for k in rows:
        dist = apply_parameters(space, mu[k])
        blade = loft_blade(dist, section, n_radial)
        blades = replicate_propeller(blade, dist.n_blades) if all_blades else [blade]
        ext = "stl" if fmt == "stl" else "csv"
        path = out / f"design_{k:04d}.{ext}"
        if fmt == "stl":
            write_stl(blades, path)
        else:
            write_grid_csv(blades, path)
        written.append(path)
    return written


def _evaluate_one(args):
    space, mu, op, stations = args
    return bem_evaluate(apply_parameters(space, mu), op, stations).as_row()


def evaluate_designs(space: ParameterSpace, mu, op: OperatingPoint, stations: int = 30,
                     jobs: int = 1) -> np.ndarray:
    """Surrogate outputs ``(kt, eta, pmax, fmax)`` per design, in design order."""
    tasks = [(space, row, op, stations) for row in np.atleast_2d(mu)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_evaluate_one, tasks, chunksize=16))
    else:
        rows = [_evaluate_one(t) for t in tasks]
    return np.array(rows, dtype=float)


def evaluate_step(baseline: BaselineSpec, designs_path, out_path, op: OperatingPoint,
                  stations: int = 30, jobs: int = 1) -> Dataset:
    mu, meta = read_designs(designs_path)
    space = baseline.space(mu.shape[1])
    Y = evaluate_designs(space, mu, op, stations, jobs)
    metadata = {
        "source": "surrogate",
        "seed": meta.get("seed", "unknown"),
        "pitch_bound": _g(space.pitch_bound),
        "camber_bound": _g(space.camber_bound),
        "J": _g(op.J),
        "Va": _g(op.Va),
        "n_rps": _g(op.n_rps),
        "D": _g(op.D),
        "rho": _g(op.rho),
        "stations": stations,
    }
    ds = Dataset(mu, Y, OUTPUT_NAMES, metadata)
    write_dataset(ds, out_path)
    return ds


def ingest_step(in_path, out_path, m: int | None = None) -> Dataset:
    ds = ingest_results(in_path, m)
    ds.metadata.setdefault("source", "ingested")
    write_dataset(ds, out_path)
    return ds


def analyze_step(dataset_path, out_dir, method: str = "local-linear", k_neighbors=None,
                 active_dim="auto") -> dict:
    """Active subspace per output plus the shared one; writes plot data files."""
    ds = ingest_results(dataset_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    subspaces, covs, fallbacks = {}, [], {}
    for name in ds.output_names:
        G = estimate_gradients(ds, name, method=method, k_neighbors=k_neighbors)
        fallbacks[name] = G.fallbacks
        C = gradient_covariance(G)
        covs.append(C)
        subspaces[name] = compute_active_subspace(G, active_dim)
    subspaces["shared"] = shared_subspace(covs, active_dim)

    m = ds.m
    half = m // 2
    labels = [f"pitch - {i + 1}" for i in range(half)] + \
             [f"camber - {i + 1}" for i in range(m - half)]
    names = list(ds.output_names) + ["shared"]
    with open(out / "eigenvalues.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index"] + names)
        for i in range(m):
            w.writerow([i + 1] + [_g(subspaces[n].eigenvalues[i]) for n in names])
    for n in names:
        write_subspace(subspaces[n], out / f"subspace_{n}.csv")
        write_eigenvector_bars(subspaces[n], out / f"eigenvector_{n}.csv", labels)
    table = sensitivity_table([subspaces[n].W[:, 0] for n in ds.output_names],
                              ds.output_names, labels)
    (out / "sensitivity.txt").write_text(table.format(), encoding="utf-8")
    with open(out / "analysis.txt", "w", encoding="utf-8") as fh:
        fh.write(f"samples: {ds.n}\nparameters: {m}\ngradient method: {method}\n")
        for n in names:
            s = subspaces[n]
            lam = s.eigenvalues
            ratio = lam[0] / lam[1] if lam[1] > 0 else float("inf")
            fh.write(f"{n}: M={s.M} lambda1/lambda2={ratio:.6g} ambiguous={s.ambiguous}"
                     + (f" fallbacks={fallbacks[n]}" if n in fallbacks else "") + "\n")
    return subspaces


@dataclass(frozen=True)
class OptimizeOptions:
    objective: str = "pmax"
    degree: int | None = 4
    train_fraction: float = 0.8
    split_seed: int = 0
    kt_tolerance: float = 0.01
    eta_constraint: bool = True
    n_grid: int = 2001


def optimize_step(dataset_path, subspace_path, out_dir, baseline: BaselineSpec,
                  options: OptimizeOptions = OptimizeOptions(),
                  op: OperatingPoint | None = None, stations: int = 30):
    ds = ingest_results(dataset_path)
    shared = read_subspace(subspace_path, M=1)
    space = baseline.space(ds.m)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    x = project(shared, ds.X)[:, 0]
    surfaces = {}
    for name in ds.output_names:
        y = ds.output(name)
        if options.degree is None:
            rs = select_degree(x, y, options.split_seed, options.train_fraction)
        else:
            rs = fit_response_surface(x, y, options.degree, options.split_seed,
                                      options.train_fraction)
        surfaces[name] = rs
        with open(out / f"rs_{name}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mu_M", name, "set", "fit"])
            role = np.full(ds.n, "train", dtype=object)
            role[rs.validation_index] = "validation"
            for i in range(ds.n):
                w.writerow([_g(x[i]), _g(y[i]), role[i], _g(rs(x[i]))])

    base = {name: float(rs(0.0)) for name, rs in surfaces.items()}
    constraints = []
    if "kt" in surfaces and options.kt_tolerance is not None:
        kt0 = base["kt"]
        tol = options.kt_tolerance * abs(kt0)
        constraints += [Constraint(surfaces["kt"], ">=", kt0 - tol, "kt lower"),
                        Constraint(surfaces["kt"], "<=", kt0 + tol, "kt upper")]
    if "eta" in surfaces and options.eta_constraint:
        constraints.append(Constraint(surfaces["eta"], ">=", base["eta"], "eta baseline"))
    result = constrained_optimize(surfaces[options.objective], constraints, space, shared,
                                  options.n_grid, outputs=surfaces)

    evaluated = {}
    if op is not None:
        opt_out = bem_evaluate(result.distributions, op, stations)
        base_out = bem_evaluate(space.baseline, op, stations)
        evaluated = {"optimal": dict(zip(OUTPUT_NAMES, opt_out.as_row())),
                     "baseline": dict(zip(OUTPUT_NAMES, base_out.as_row()))}
    _write_report(out, ds, surfaces, base, result, constraints, options, evaluated)
    _write_curves(out, space, result)
    return result, surfaces, evaluated


def _write_report(out, ds, surfaces, base, result, constraints, options, evaluated):
    names = list(ds.output_names)
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "value"])
        w.writerow(["mu_M_optimal", _g(result.mu_M)])
        w.writerow(["mu_M_achieved", _g(result.mu_M_achieved)])
        w.writerow(["backmap_deviation", _g(result.backmap_deviation)])
        w.writerow(["clamped", int(result.clamped)])
        w.writerow(["filtered", int(result.filtered)])
        w.writerow(["shrink_factor", _g(result.shrink_factor)])
        w.writerow(["binding", ";".join(result.binding)])
        for k, v in enumerate(result.mu, 1):
            w.writerow([f"mu_{k}", _g(v)])
        for n in names:
            w.writerow([f"predicted_{n}", _g(result.predicted[n])])
            w.writerow([f"baseline_predicted_{n}", _g(base[n])])
        for tag, vals in evaluated.items():
            for n in names:
                w.writerow([f"{tag}_surrogate_{n}", _g(vals[n])])
    lines = [
        f"objective: minimize {options.objective}",
        f"constraints: {', '.join(c.name + ' ' + c.relation + ' ' + format(c.bound, '.6g') for c in constraints) or 'none'}",
        f"feasible grid points: {result.n_feasible} of {options.n_grid}",
        f"optimal active variable: {result.mu_M:.6g} (achieved {result.mu_M_achieved:.6g})",
        f"binding constraints: {', '.join(result.binding) or 'none'}",
        f"clamped: {result.clamped}  smoothness shrink factor: {result.shrink_factor:.6g}",
        "",
        "response surfaces:",
    ]
    for n in names:
        rs = surfaces[n]
        mt = rs.metrics
        lines.append(f"  {n}: degree {rs.degree}, train R2 {mt['train_r2']:.6f}, "
                     f"validation R2 {mt['validation_r2']:.6f}, "
                     f"train/validation {rs.train_index.size}/{rs.validation_index.size}")
    lines += ["", "predicted outputs (baseline -> optimal):"]
    for n in names:
        lines.append(f"  {n}: {base[n]:.6g} -> {result.predicted[n]:.6g}")
    if evaluated:
        lines += ["", "surrogate evaluation (baseline -> optimal):"]
        for n in names:
            lines.append(f"  {n}: {evaluated['baseline'][n]:.6g} -> {evaluated['optimal'][n]:.6g}")
    (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_curves(out, space, result):
    dist = result.distributions
    lo, hi = dist.domain
    rr = np.linspace(lo, hi, 101)
    for name, fname in (("pitch", "optimal_pitch.csv"), ("max_camber", "optimal_camber.csv")):
        b = getattr(space.baseline, name)(rr)
        o = getattr(dist, name)(rr)
        with open(out / fname, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r_over_R", "baseline", "optimal"])
            for i in range(rr.size):
                w.writerow([_g(rr[i]), _g(b[i]), _g(o[i])])
