"""Open-water performance: coefficients, blade-element momentum surrogate, datasets."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, DataError, ParseError, SchemaError
from .geometry import RadialDistributions

OUTPUT_NAMES = ("kt", "eta", "pmax", "fmax")

LIFT_SLOPE = 2.0 * math.pi
CD0 = 0.008
CD2 = 0.01
RELAXATION = 0.3
TOLERANCE = 1e-8
MAX_ITER = 200
TIP_REGION = 0.10


@dataclass(frozen=True)
class OperatingPoint:
    Va: float
    n_rps: float
    D: float
    rho: float = 1025.0

    def __post_init__(self):
        if not (self.n_rps > 0 and self.D > 0 and self.rho > 0 and self.Va >= 0):
            raise ValueError("need n_rps > 0, D > 0, rho > 0 and Va >= 0")

    @property
    def J(self) -> float:
        return self.Va / (self.n_rps * self.D)

    @classmethod
    def from_advance_ratio(cls, J: float, n_rps: float, D: float, rho: float = 1025.0):
        return cls(J * n_rps * D, n_rps, D, rho)


@dataclass(frozen=True)
class Coefficients:
    J: float
    kt: float
    kq: float
    eta: float
    eta_defined: bool


def efficiency(J: float, kt: float, kq: float) -> float:
    return J / (2.0 * math.pi) * kt / kq


def hydrodynamic_coefficients(T: float, Q: float, op: OperatingPoint) -> Coefficients:
    """``J``, ``K_T``, ``K_Q`` and open-water efficiency.

    ``eta`` is NaN with ``eta_defined=False`` when ``Q <= 0``.
    """
    n2 = op.rho * op.n_rps**2
    kt = T / (n2 * op.D**4)
    kq = Q / (n2 * op.D**5)
    if Q > 0:
        return Coefficients(op.J, kt, kq, efficiency(op.J, kt, kq), True)
    return Coefficients(op.J, kt, kq, math.nan, False)


@dataclass(frozen=True)
class PerformanceOutputs:
    J: float
    kt: float
    kq: float
    eta: float
    pmax: float
    fmax: float

    def as_row(self) -> list[float]:
        return [self.kt, self.eta, self.pmax, self.fmax]


@dataclass(frozen=True, eq=False)
class BEMSolution:
    """Converged strip quantities, one entry per radial station."""

    r: np.ndarray
    chord: np.ndarray
    phi: np.ndarray
    beta: np.ndarray
    alpha: np.ndarray
    cl: np.ndarray
    cd: np.ndarray
    F: np.ndarray
    W: np.ndarray
    dT: np.ndarray
    dQ: np.ndarray
    gamma: np.ndarray
    iterations: int


def tip_loss(n_blades: int, r, R: float, beta) -> np.ndarray:
    """Prandtl factor; 1 where the inflow angle is not positive."""
    r = np.asarray(r, dtype=float)
    sb = np.sin(beta)
    F = np.ones_like(r)
    ok = sb > 0
    f = n_blades * (R - r[ok]) / (2.0 * r[ok] * sb[ok])
    F[ok] = 2.0 / math.pi * np.arccos(np.exp(-f))
    return F


def bem_solve(dist: RadialDistributions, op: OperatingPoint, stations: int = 30) -> BEMSolution:
    """Damped fixed-point solution of the blade-element momentum balance.

    Unknowns are the axial and tangential induced velocities at each station.
    Sectional loading includes the tip-loss factor; the axial momentum balance
    ``dT = 4 pi r rho (Va + v) v`` gives ``v`` and the angular one gives the
    tangential component.
    """
    if stations < 10:
        raise ValueError("stations must be >= 10")
    lo, hi = dist.domain
    rr = np.linspace(lo, hi, stations)
    R = dist.radius
    r = rr * R
    vals = dist.sample(rr)
    c = vals["chord"]
    camber = vals["max_camber"]
    phi = np.arctan(vals["pitch"] / (2.0 * math.pi * r))
    B, rho, Va = dist.n_blades, op.rho, op.Va
    omega_r = 2.0 * math.pi * op.n_rps * r
    scale = 2.0 * math.pi * op.n_rps * R

    v = np.zeros(stations)
    w = np.zeros(stations)

    def strip(v, w):
        ua = Va + v
        ut = omega_r - w
        W = np.hypot(ua, ut)
        beta = np.arctan2(ua, ut)
        F = tip_loss(B, r, R, beta)
        alpha = phi - beta
        cl = LIFT_SLOPE * (alpha + 2.0 * camber)
        cd = CD0 + CD2 * cl**2
        q = 0.5 * rho * W**2 * c * B * F
        dT = q * (cl * np.cos(beta) - cd * np.sin(beta))
        dQ = q * (cl * np.sin(beta) + cd * np.cos(beta)) * r
        return W, beta, F, alpha, cl, cd, dT, dQ

    for it in range(1, MAX_ITER + 1):
        W, beta, F, alpha, cl, cd, dT, dQ = strip(v, w)
        disc = np.maximum(Va**2 + dT / (math.pi * r * rho), 0.0)
        v_new = 0.5 * (-Va + np.sqrt(disc))
        axial = np.maximum(Va + v_new, 1e-12 * scale)
        w_new = dQ / (4.0 * math.pi * r**2 * rho * axial)
        res = np.maximum(np.abs(v_new - v), np.abs(w_new - w))
        v = v + RELAXATION * (v_new - v)
        w = w + RELAXATION * (w_new - w)
        if np.all(res < TOLERANCE * scale):
            break
    else:
        bad = int(np.argmax(res >= TOLERANCE * scale))
        raise ConvergenceError(
            f"induction did not converge at station {bad} (r/R={rr[bad]:.4f}) "
            f"after {MAX_ITER} iterations", station=bad)
    W, beta, F, alpha, cl, cd, dT, dQ = strip(v, w)
    gamma = 0.5 * c * cl * W
    return BEMSolution(r, c, phi, beta, alpha, cl, cd, F, W, dT, dQ, gamma, it)


def bem_evaluate(dist: RadialDistributions, op: OperatingPoint,
                 stations: int = 30) -> PerformanceOutputs:
    """Integrated performance plus tip-vortex pressure and frequency proxies."""
    sol = bem_solve(dist, op, stations)
    T = float(np.trapezoid(sol.dT, sol.r))
    Q = float(np.trapezoid(sol.dQ, sol.r))
    coef = hydrodynamic_coefficients(T, Q, op)
    R = dist.radius
    tip = sol.r >= R - TIP_REGION * (R - dist.hub_radius)
    dgamma = np.gradient(sol.gamma, sol.r)
    pmax = float(op.rho * sol.W[-1] * np.max(np.abs(dgamma[tip])))
    gmax = float(np.max(np.abs(sol.gamma)))
    ratio = float(sol.gamma[-1]) / gmax if gmax > 0 else 0.0
    fmax = float(dist.n_blades * op.n_rps * (1.0 + ratio))
    return PerformanceOutputs(coef.J, coef.kt, coef.kq, coef.eta, pmax, fmax)


@dataclass(eq=False)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    output_names: tuple = OUTPUT_NAMES
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        self.output_names = tuple(self.output_names)
        if self.X.shape[0] != self.Y.shape[0]:
            raise DataError(f"{self.X.shape[0]} input rows but {self.Y.shape[0]} output rows")
        if self.Y.shape[1] != len(self.output_names):
            raise DataError("output column count does not match output names")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.Y))):
            raise DataError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def output(self, name: str) -> np.ndarray:
        try:
            return self.Y[:, self.output_names.index(name)]
        except ValueError:
            raise KeyError(f"no output column {name!r}") from None


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _write_metadata(fh, metadata: dict):
    for key in sorted(metadata):
        fh.write(f"# {key}: {metadata[key]}\n")


def _read_table(path):
    """Split a '#'-commented CSV into metadata, header and numbered rows."""
    meta, header, rows = {}, None, []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                key, sep, value = text[1:].partition(":")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            cells = next(csv.reader([text]))
            if header is None:
                header = [c.strip() for c in cells]
            else:
                rows.append((lineno, cells))
    if header is None:
        raise SchemaError("file has no header line")
    return meta, header, rows


def _parse_rows(rows, width):
    out = np.empty((len(rows), width))
    for k, (lineno, cells) in enumerate(rows):
        if len(cells) != width:
            raise ParseError(f"expected {width} values, found {len(cells)}", lineno)
        try:
            out[k] = [float(c) for c in cells]
        except ValueError:
            raise ParseError("non-numeric value", lineno) from None
        if not np.all(np.isfinite(out[k])):
            raise DataError(f"line {lineno}: non-finite value")
    return out


def write_dataset(dataset: Dataset, path) -> None:
    """CSV with ``# key: value`` metadata, header ``mu_1..mu_m,<outputs>``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _write_metadata(fh, dataset.metadata)
        header = [f"mu_{k + 1}" for k in range(dataset.m)] + list(dataset.output_names)
        fh.write(",".join(header) + "\n")
        for x, y in zip(dataset.X, dataset.Y):
            fh.write(",".join(_fmt(v) for v in np.concatenate([x, y])) + "\n")


def ingest_results(path, m: int | None = None,
                   output_names=OUTPUT_NAMES) -> Dataset:
    """Read and validate a dataset CSV written here or by an external solver."""
    meta, header, rows = _read_table(path)
    missing = [name for name in output_names if name not in header]
    if missing:
        raise SchemaError(f"missing output column(s): {', '.join(missing)}")
    n_inputs = sum(1 for h in header if h.startswith("mu_"))
    if m is None:
        m = n_inputs
    expected = [f"mu_{k + 1}" for k in range(m)]
    if header[:m] != expected:
        raise SchemaError(f"header must start with mu_1..mu_{m}")
    if n_inputs != m:
        raise SchemaError(f"header has {n_inputs} input columns, expected {m}")
    data = _parse_rows(rows, len(header))
    cols = [header.index(name) for name in output_names]
    return Dataset(data[:, :m], data[:, cols], tuple(output_names), meta)


def write_designs(mu, path, metadata: dict | None = None) -> None:
    """Design matrix CSV (header ``mu_1..mu_m``); metadata goes to a sidecar."""
    mu = np.atleast_2d(mu)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(f"mu_{k + 1}" for k in range(mu.shape[1])) + "\n")
        for row in mu:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    if metadata is not None:
        sidecar = Path(str(path) + ".meta")
        with open(sidecar, "w", encoding="utf-8", newline="") as fh:
            _write_metadata(fh, metadata)


def read_designs(path) -> tuple[np.ndarray, dict]:
    _, header, rows = _read_table(path)
    if header != [f"mu_{k + 1}" for k in range(len(header))]:
        raise SchemaError("design file header must be mu_1..mu_m")
    mu = _parse_rows(rows, len(header))
    meta = {}
    sidecar = Path(str(path) + ".meta")
    if sidecar.exists():
        meta = read_metadata(sidecar)
    return mu, meta


def read_metadata(path) -> dict:
    meta = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        key, sep, value = line.lstrip("# ").partition(":")
        if sep:
            meta[key.strip()] = value.strip()
    return meta
