"""One-dimensional polynomial response surfaces and reduced-space optimization."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import FitError, InfeasibleError
from .parameterization import (ParameterSpace, apply_parameters, make_rng,
                               smoothness_filter)
from .subspace import ActiveSubspace, project, reconstruct

MAX_CONDITION = 1e12
DEGREE_GAIN = 0.005
BACKMAP_TOL = 0.05

SENSITIVITY_THRESHOLDS = (0.30, 0.15, 0.05)
SENSITIVITY_CLASSES = ("++", "+", "+-", "-")


class Prediction(NamedTuple):
    value: float
    extrapolated: bool


@dataclass(frozen=True, eq=False)
class ResponseSurface:
    """Polynomial ``sum_k c_k x^k`` (ascending powers) on a validity domain."""

    coefficients: np.ndarray
    domain: tuple = (-1.0, 1.0)
    train_fraction: float = 0.8
    metrics: dict = field(default_factory=dict)
    train_index: np.ndarray | None = None
    validation_index: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        lo, hi = (float(v) for v in self.domain)
        if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
            raise ValueError("response surface domain must be a finite interval")
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "domain", (lo, hi))

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c in self.coefficients[::-1]:
            out = out * x + c
        return out


def predict(rs: ResponseSurface, x: float) -> Prediction:
    lo, hi = rs.domain
    return Prediction(float(rs(x)), not (lo <= x <= hi))


def r_squared(y, yhat) -> float:
    y = np.asarray(y, dtype=float)
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else -np.inf
    return 1.0 - ss_res / ss_tot


def split_indices(n: int, train_fraction: float, seed: int):
    n_train = int(round(train_fraction * n))
    perm = make_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def fit_response_surface(mu_M, y, degree: int = 4, split_seed: int = 0,
                         train_fraction: float = 0.8) -> ResponseSurface:
    """Least-squares polynomial on a seeded random training split.

    The held-out rows give the validation metrics.
    """
    x = np.asarray(mu_M, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if x.size != y.size:
        raise ValueError("mu_M and y differ in length")
    if x.size < 5 * (degree + 1):
        raise FitError(f"need at least {5 * (degree + 1)} samples for degree {degree}")
    tr, va = split_indices(x.size, train_fraction, split_seed)
    V = np.vander(x[tr], degree + 1, increasing=True)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise FitError(f"Vandermonde condition {cond:.3g}; try a lower degree", cond)
    coef = np.linalg.lstsq(V, y[tr], rcond=None)[0]
    rs = ResponseSurface(coef, (x[tr].min(), x[tr].max()), train_fraction)
    fit_tr, fit_va = rs(x[tr]), rs(x[va])
    metrics = {
        "train_r2": r_squared(y[tr], fit_tr),
        "train_rmse": float(np.sqrt(np.mean((y[tr] - fit_tr) ** 2))),
        "validation_r2": r_squared(y[va], fit_va) if va.size else float("nan"),
        "validation_rmse": float(np.sqrt(np.mean((y[va] - fit_va) ** 2))) if va.size else float("nan"),
    }
    return ResponseSurface(coef, rs.domain, train_fraction, metrics, tr, va)


def select_degree(mu_M, y, split_seed: int = 0, train_fraction: float = 0.8,
                  max_degree: int = 8) -> ResponseSurface:
    """Smallest degree that no higher degree beats by 0.005 in validation R^2.

    Comparing against every higher degree, not just the next one, avoids
    stopping on a plateau such as an odd term that an even ridge does not use.
    """
    n = np.size(mu_M)
    fits = []
    for d in range(1, max_degree + 1):
        if n < 5 * (d + 1):
            break
        try:
            fits.append(fit_response_surface(mu_M, y, d, split_seed, train_fraction))
        except FitError:
            break
    if not fits:
        raise FitError(f"need at least 10 samples for a linear fit, got {n}")
    r2 = np.array([f.metrics["validation_r2"] for f in fits])
    for i, fit in enumerate(fits):
        if i == len(fits) - 1 or np.max(r2[i + 1:]) - r2[i] < DEGREE_GAIN:
            return fit
    return fits[-1]


@dataclass(frozen=True, eq=False)
class Constraint:
    rs: ResponseSurface
    relation: str
    bound: float
    label: str = ""

    def __post_init__(self):
        if self.relation not in ("<=", ">="):
            raise ValueError(f"relation must be '<=' or '>=', got {self.relation!r}")

    def satisfied(self, x) -> np.ndarray:
        v = self.rs(x)
        return v <= self.bound if self.relation == "<=" else v >= self.bound

    @property
    def name(self) -> str:
        return self.label or f"rs {self.relation} {self.bound:g}"


@dataclass(eq=False)
class OptimizationResult:
    mu_M: float
    value: float
    binding: list
    n_feasible: int
    mu: np.ndarray | None = None
    mu_M_achieved: float | None = None
    backmap_deviation: float = 0.0
    clamped: bool = False
    filtered: bool = False
    shrink_factor: float = 1.0
    predicted: dict = field(default_factory=dict)
    distributions: object = None


def _common_domain(surfaces) -> tuple[float, float]:
    lo = max(rs.domain[0] for rs in surfaces)
    hi = min(rs.domain[1] for rs in surfaces)
    if lo > hi:
        raise InfeasibleError("response surfaces have disjoint domains")
    return lo, hi


def constrained_optimize(objective: ResponseSurface, constraints: Sequence[Constraint] = (),
                         space: ParameterSpace | None = None,
                         subspace: ActiveSubspace | None = None, n_grid: int = 2001,
                         domain=None, outputs: dict | None = None) -> OptimizationResult:
    """Minimize ``objective`` on a dense grid of the shared active variable.

    With ``subspace`` the optimum is mapped back with zero inactive
    variables, clamped to the unit box and, with ``space``, shrunk towards
    the baseline until the deformed curves pass the smoothness filter.
    ``outputs`` maps names to surfaces evaluated at the achieved design.
    """
    if n_grid < 100:
        raise ValueError("n_grid must be >= 100")
    lo, hi = domain if domain is not None else _common_domain(
        [objective] + [c.rs for c in constraints])
    grid = np.linspace(lo, hi, n_grid)
    feasible = np.ones(n_grid, dtype=bool)
    per = []
    for c in constraints:
        ok = c.satisfied(grid)
        per.append(ok)
        feasible &= ok
    if not feasible.any():
        never = [c.name for c, ok in zip(constraints, per) if not ok.any()]
        binding = never or [c.name for c in constraints]
        raise InfeasibleError(
            "no grid point satisfies all constraints: " + ", ".join(binding), binding)
    values = objective(grid)
    k = int(np.flatnonzero(feasible)[np.argmin(values[feasible])])
    binding = []
    for c, ok in zip(constraints, per):
        nbr = [j for j in (k - 1, k + 1) if 0 <= j < n_grid]
        if any(not ok[j] for j in nbr):
            binding.append(c.name)
    res = OptimizationResult(float(grid[k]), float(values[k]), binding, int(feasible.sum()))
    if subspace is None:
        return res

    if subspace.M != 1:
        raise ValueError("back-mapping needs a one-dimensional active subspace")
    mu = reconstruct(subspace, [res.mu_M])
    clipped = np.clip(mu, -1.0, 1.0)
    res.clamped = bool(np.any(clipped != mu))
    mu = clipped
    if space is not None:
        factor = 1.0
        while not smoothness_filter(space, mu * factor):
            factor *= 0.5
            if factor < 2.0**-30:
                factor = 0.0
                break
        res.filtered = factor < 1.0
        res.shrink_factor = factor
        mu = mu * factor
        res.distributions = apply_parameters(space, mu)
    res.mu = mu
    res.mu_M_achieved = float(project(subspace, mu)[0])
    res.backmap_deviation = abs(res.mu_M_achieved - res.mu_M)
    achieved = float(objective(res.mu_M_achieved))
    if abs(achieved - res.value) > BACKMAP_TOL * abs(res.value):
        warnings.warn(
            f"back-mapped design changes the predicted objective from {res.value:.6g} "
            f"to {achieved:.6g}", RuntimeWarning, stacklevel=2)
    res.predicted = {name: float(rs(res.mu_M_achieved)) for name, rs in (outputs or {}).items()}
    return res


@dataclass(frozen=True)
class SensitivityTable:
    classes: np.ndarray
    output_labels: tuple
    parameter_labels: tuple

    def rows(self) -> list[list[str]]:
        """Two side-by-side blocks: first half of the parameters, then the second."""
        half = len(self.parameter_labels) // 2
        out = []
        for i in range(half):
            j = half + i
            out.append([self.parameter_labels[i], *self.classes[i],
                        self.parameter_labels[j], *self.classes[j]])
        return out

    def header(self) -> list[str]:
        return ["Control points", *self.output_labels] * 2

    def format(self) -> str:
        table = [self.header()] + self.rows()
        widths = [max(len(r[c]) for r in table) for c in range(len(table[0]))]
        return "\n".join(" | ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip()
                         for r in table) + "\n"


def classify_weight(w: float, thresholds=SENSITIVITY_THRESHOLDS) -> str:
    a = abs(w)
    for t, label in zip(thresholds, SENSITIVITY_CLASSES):
        if a >= t:
            return label
    return SENSITIVITY_CLASSES[-1]


def sensitivity_table(w1_per_output, output_labels, parameter_labels=None,
                      thresholds=SENSITIVITY_THRESHOLDS) -> SensitivityTable:
    """Four-class influence of every parameter on every output."""
    vecs = []
    for w in w1_per_output:
        w = np.asarray(w, dtype=float).ravel()
        norm = np.linalg.norm(w)
        if abs(norm - 1.0) > 1e-8:
            warnings.warn("eigenvector not unit length; normalizing", RuntimeWarning,
                          stacklevel=2)
            w = w / norm
        vecs.append(w)
    m = vecs[0].size
    if parameter_labels is None:
        half = m // 2
        parameter_labels = ([f"pitch - {i + 1}" for i in range(half)]
                            + [f"camber - {i + 1}" for i in range(m - half)])
    classes = np.array([[classify_weight(w[i], thresholds) for w in vecs] for i in range(m)],
                       dtype=object)
    return SensitivityTable(classes, tuple(output_labels), tuple(parameter_labels))
