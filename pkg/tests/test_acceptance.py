"""Acceptance gate: one check per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import csv
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from bladeas.airfoil import naca4_section, scale_max_camber
from bladeas.cli import run
from bladeas.errors import InfeasibleError
from bladeas.evaluation import OperatingPoint, hydrodynamic_coefficients
from bladeas.geometry import load_baseline, loft_blade, replicate_propeller, rotation_about_axis
from bladeas.parameterization import ParameterSpace, apply_parameters
from bladeas.response import Constraint, ResponseSurface, constrained_optimize, fit_response_surface
from bladeas.spline import (BSplineCurve, basis_matrix, derivative, displace_control_points,
                            evaluate, fit_least_squares)
from bladeas.subspace import (compute_active_subspace, estimate_gradients, inactive, project,
                              read_subspace, reconstruct)


RESULTS = {}


def report(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    RESULTS[number] = line
    print(line, flush=True)
    return passed


def check_1():
    start = time.perf_counter()
    J, kt, kq = 1.019, 0.3835, 0.098875
    op = OperatingPoint.from_advance_ratio(J, 20.0, 0.25)
    n2 = op.rho * op.n_rps**2
    c = hydrodynamic_coefficients(kt * n2 * op.D**4, kq * n2 * op.D**5, op)
    ok_eta = abs(c.eta - 0.629) <= 1e-3
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(10_000):
        o = OperatingPoint(rng.uniform(0, 10), rng.uniform(1, 40), rng.uniform(0.1, 1.0))
        r = hydrodynamic_coefficients(rng.uniform(0, 1e4), rng.uniform(1e-3, 1e3), o)
        rel = abs(r.eta * 2 * math.pi * r.kq - r.J * r.kt) / max(1.0, abs(r.J * r.kt))
        worst = max(worst, rel)
    elapsed = time.perf_counter() - start
    ok = ok_eta and worst <= 1e-12 and elapsed < 1.0
    return report(1, ok, f"eta={c.eta:.6f}, identity error {worst:.2e}, {elapsed:.2f} s")


def _random_curve(rng):
    interior = np.sort(rng.uniform(0, 1, 6))
    knots = np.concatenate([np.zeros(4), interior, np.ones(4)])
    return BSplineCurve(3, knots, rng.normal(size=10))


def check_2():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    pou = ends = fd = 0.0
    local = True
    for _ in range(100):
        c = _random_curve(rng)
        t = rng.uniform(0, 1, 100)
        pou = max(pou, np.max(np.abs(basis_matrix(c.knots, 3, t).sum(axis=1) - 1)))
        ends = max(ends, abs(evaluate(c, 0.0) - c.control_points[0]),
                   abs(evaluate(c, 1.0) - c.control_points[-1]))
        i = int(rng.integers(0, 10))
        moved = displace_control_points(c, [1.0], [i])
        out = (t < c.knots[i]) | (t > c.knots[i + 4])
        local &= bool(np.array_equal(evaluate(moved, t[out]), evaluate(c, t[out])))
        s = rng.uniform(0.01, 0.99, 50)
        h = 1e-6
        d = derivative(c, s, 1)
        num = (evaluate(c, s + h) - evaluate(c, s - h)) / (2 * h)
        scale = np.maximum(np.abs(d), np.max(np.abs(c.control_points)))
        fd = max(fd, float(np.max(np.abs(num - d) / scale)))
    t = np.linspace(0, 1, 50)
    resid = float(np.max(np.abs(evaluate(fit_least_squares(t, t**3, 3, 6), t) - t**3)))
    elapsed = time.perf_counter() - start
    ok = (pou <= 1e-12 and ends <= 1e-14 and local and fd <= 1e-5 and resid < 1e-9
          and elapsed < 10)
    return report(2, ok, f"unity {pou:.1e}, ends {ends:.1e}, local support {local}, "
                         f"fd {fd:.1e}, cubic fit {resid:.1e}, {elapsed:.2f} s")


def _cos(u, v):
    return abs(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))


def check_3():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    a = rng.normal(size=20)
    X = rng.uniform(-1, 1, (1100, 20))
    lin = compute_active_subspace(estimate_gradients(X, method="analytic",
                                                     gradients=np.tile(a, (1100, 1))))
    cos_lin = _cos(lin.W1[:, 0], a)
    ratio = lin.eigenvalues[1] / lin.eigenvalues[0]
    sin = compute_active_subspace(estimate_gradients(X, np.sin(X @ (a / np.linalg.norm(a)))))
    cos_sin = _cos(sin.W1[:, 0], a)
    elapsed = time.perf_counter() - start
    ok = cos_lin > 1 - 1e-12 and ratio < 1e-12 and cos_sin > 0.99 and sin.M == 1 and elapsed < 60
    return report(3, ok, f"linear |1-cos| {abs(1 - cos_lin):.1e}, lambda2/lambda1 {ratio:.1e}; "
                         f"sin ridge cos {cos_sin:.5f}, auto-M {sin.M}; {elapsed:.2f} s")


def check_4():
    rng = np.random.default_rng(4)
    G = rng.normal(size=(300, 20)) * np.geomspace(10, 0.01, 20)
    sub = compute_active_subspace(G, M=3)
    mu = rng.uniform(-1, 1, (10_000, 20))
    err = float(np.max(np.abs(reconstruct(sub, project(sub, mu), inactive(sub, mu)) - mu)))
    minimal = True
    for _ in range(10):
        v = rng.normal(size=3)
        base = reconstruct(sub, v)
        pre = base + rng.normal(size=(10_000, 17)) @ sub.W2.T
        minimal &= bool(np.allclose(project(sub, pre), v, atol=1e-12))
        minimal &= bool(np.all(np.linalg.norm(base) <= np.linalg.norm(pre, axis=1) + 1e-15))
    ok = err <= 1e-12 and minimal
    return report(4, ok, f"round trip {err:.1e}, minimum norm {minimal}")


def check_5():
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, 1100)
    exact = fit_response_surface(x, (x - 0.3) ** 2 + 1, degree=2)
    r2 = exact.metrics["validation_r2"]
    sizes = (exact.train_index.size, exact.validation_index.size)
    clean = 2 * x**4 - x**2 + 0.3 * x
    noisy = clean + 0.01 * np.std(clean) * rng.normal(size=x.size)
    quartic = fit_response_surface(x, noisy, degree=4).metrics["validation_r2"]
    ok = abs(r2 - 1) <= 1e-10 and sizes == (880, 220) and quartic >= 0.99
    return report(5, ok, f"parabola R2-1 {r2 - 1:.1e}, split {sizes[0]}/{sizes[1]}, "
                         f"quartic R2 {quartic:.5f}")


def check_6():
    obj = ResponseSurface([1.09, -0.6, 1.0])
    cell = 2.0 / 2000
    fine = np.linspace(-1, 1, 400_001)
    free = constrained_optimize(obj, n_grid=2001)
    oracle_free = fine[np.argmin(obj(fine))]
    line = ResponseSurface([0.0, 1.0])
    bound = constrained_optimize(obj, [Constraint(line, "<=", 0.1)], n_grid=2001)
    ok_fine = fine[fine <= 0.1]
    oracle_bound = ok_fine[np.argmin(obj(ok_fine))]
    try:
        constrained_optimize(obj, [Constraint(line, ">=", 1.0), Constraint(line, "<=", 0.0)])
        raised = False
    except InfeasibleError:
        raised = True
    ok = (abs(free.mu_M - oracle_free) <= cell and abs(bound.mu_M - oracle_bound) <= cell
          and raised)
    return report(6, ok, f"vertex {free.mu_M:.4f} (oracle {oracle_free:.4f}), "
                         f"bounded {bound.mu_M:.4f} (oracle {oracle_bound:.4f}), "
                         f"infeasible raised {raised}")


def check_7():
    baseline = load_baseline()
    # the closed chordwise loop has 2n - 1 points; 41 stations give 81
    sec = naca4_section("2412", 41)
    blade = loft_blade(baseline, sec, n_radial=50)
    g = blade.grid
    cyl = float(np.max(np.abs(g[..., 1] ** 2 + g[..., 2] ** 2 - blade.section_radii[:, None] ** 2)))
    scaled = scale_max_camber(sec, 0.0317)
    camber = abs(scaled.max_camber - 0.0317)
    blades = replicate_propeller(blade, 5)
    rot = rotation_about_axis(2 * math.pi / 5)
    sym = max(float(np.max(np.abs(blades[k].grid @ rot.T - blades[(k + 1) % 5].grid)))
              for k in range(5))
    space = ParameterSpace.default(baseline)
    zero = float(np.max(np.abs(loft_blade(apply_parameters(space, np.zeros(20)), sec, 50).grid - g)))
    ok = cyl < 1e-9 and camber <= 1e-12 and sym <= 1e-12 and zero <= 1e-9
    return report(7, ok, f"grid {g.shape[0]}x{g.shape[1]}: cylinder {cyl:.1e}, camber {camber:.1e}, "
                         f"symmetry {sym:.1e}, zero design {zero:.1e}")


CONFIG = """\
# acceptance campaign
seed = 42
n_samples = 1100
m = 20
advance_ratio = 1.019
rps = 20
build_rows = 0,1
"""


def _campaign(root: Path):
    root.mkdir(parents=True, exist_ok=True)
    cfg = root / "campaign.cfg"
    cfg.write_text(CONFIG)
    start = time.perf_counter()
    code = run(["pipeline", "--config", str(cfg), "-o", str(root / "out")])
    return code, time.perf_counter() - start


def _report_values(path):
    with open(path, newline="") as fh:
        return {row[0]: row[1] for row in csv.reader(fh)}


def check_8(root: Path):
    code, elapsed = _campaign(root / "run1")
    out = root / "run1" / "out"
    if code != 0:
        return report(8, False, f"pipeline exit code {code}")
    kt = read_subspace(out / "analysis" / "subspace_kt.csv", M=1).eigenvalues
    gap = kt[0] / kt[1]
    rep = _report_values(out / "optimization" / "report.csv")
    opt, base = float(rep["predicted_pmax"]), float(rep["baseline_predicted_pmax"])
    ok = elapsed < 300 and gap >= 10 and opt <= base
    return report(8, ok, f"1100 designs in {elapsed:.1f} s, K_T lambda1/lambda2 {gap:.1f}, "
                         f"predicted P_max {opt:.6g} vs baseline {base:.6g}")


def check_9(root: Path):
    first = root / "run1" / "out"
    if not first.exists():
        _campaign(root / "run1")
    code, _ = _campaign(root / "run2")
    second = root / "run2" / "out"
    a = sorted(p.relative_to(first) for p in first.rglob("*")
               if p.suffix in (".csv", ".stl", ".txt", ".meta"))
    b = sorted(p.relative_to(second) for p in second.rglob("*")
               if p.suffix in (".csv", ".stl", ".txt", ".meta"))
    same = a == b and all((first / p).read_bytes() == (second / p).read_bytes() for p in a)
    n_stl = sum(p.suffix == ".stl" for p in a)
    n_csv = sum(p.suffix == ".csv" for p in a)
    ok = code == 0 and same and n_stl == 2
    return report(9, ok, f"{len(a)} artifacts ({n_csv} CSV, {n_stl} STL) byte-identical: {same}")


def test_criterion_1_efficiency_closure():
    assert check_1()


def test_criterion_2_spline_kernel():
    assert check_2()


def test_criterion_3_ridge_recovery():
    assert check_3()


def test_criterion_4_projection_algebra():
    assert check_4()


def test_criterion_5_response_surface():
    assert check_5()


def test_criterion_6_constrained_optimization():
    assert check_6()


def test_criterion_7_geometry_invariants():
    assert check_7()


@pytest.fixture(scope="module")
def campaign_root(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_criterion_8_end_to_end_campaign(campaign_root):
    assert check_8(campaign_root)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_criterion_9_io_determinism(campaign_root):
    assert check_9(campaign_root)


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        results = [check_1(), check_2(), check_3(), check_4(), check_5(), check_6(), check_7(),
                   check_8(Path(tmp)), check_9(Path(tmp))]
    sys.exit(0 if all(results) else 1)
