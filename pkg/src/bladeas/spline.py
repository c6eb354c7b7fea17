"""Clamped polynomial B-spline curves.

Every radial distribution of the blade (chord, pitch, skew, rake and
maximum camber) is held as a :class:`BSplineCurve`.  Curves are immutable;
morphing returns a new curve.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FitError, InvalidOrderError, ParseError

INFLECTION_TOL = 1e-10
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class BSplineCurve:
    """Clamped B-spline of arbitrary degree.

    Parameters
    ----------
    degree : int
        Polynomial degree ``p >= 1``.
    knots : array_like
        Nondecreasing knot vector of length ``n_ctrl + p + 1`` whose first and
        last knots are repeated ``p + 1`` times.
    control_points : array_like
        ``(n_ctrl,)`` for scalar curves or ``(n_ctrl, d)`` for curves in R^d.
    """

    degree: int
    knots: np.ndarray
    control_points: np.ndarray

    def __post_init__(self):
        p = int(self.degree)
        knots = np.array(self.knots, dtype=float)
        cps = np.array(self.control_points, dtype=float)
        if p < 1:
            raise ValueError(f"degree must be >= 1, got {p}")
        if cps.ndim not in (1, 2):
            raise ValueError("control points must be a 1D or 2D array")
        n = cps.shape[0]
        if n <= p:
            raise ValueError(f"need more than {p} control points, got {n}")
        if knots.shape != (n + p + 1,):
            raise ValueError(
                f"expected {n + p + 1} knots for {n} control points of degree {p}, "
                f"got {knots.size}")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")
        if np.any(knots[:p + 1] != knots[0]) or np.any(knots[-p - 1:] != knots[-1]):
            raise ValueError("knot vector must be clamped (end multiplicity degree+1)")
        if knots[-1] <= knots[0]:
            raise ValueError("knot vector spans an empty domain")
        knots.setflags(write=False)
        cps.setflags(write=False)
        object.__setattr__(self, "degree", p)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "control_points", cps)

    @property
    def n_ctrl(self) -> int:
        return self.control_points.shape[0]

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[self.n_ctrl])

    def __call__(self, t):
        return evaluate(self, t)

    def with_control_points(self, control_points) -> "BSplineCurve":
        return BSplineCurve(self.degree, self.knots, control_points)

    def to_text(self) -> str:
        """Plain-text record: degree line, knot line, then one line per control point."""
        lines = [str(self.degree), ",".join(format(k, ".17g") for k in self.knots)]
        cps = self.control_points.reshape(self.n_ctrl, -1)
        lines += [",".join(format(c, ".17g") for c in row) for row in cps]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BSplineCurve":
        rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if len(rows) < 3:
            raise ParseError("curve record needs degree, knots and control points")
        try:
            degree = int(rows[0])
            knots = [float(v) for v in rows[1].split(",")]
            cps = np.array([[float(v) for v in r.split(",")] for r in rows[2:]])
        except ValueError as exc:
            raise ParseError(f"malformed curve record: {exc}") from None
        if cps.shape[1] == 1:
            cps = cps[:, 0]
        return cls(degree, knots, cps)


def find_span(knots: np.ndarray, degree: int, n_ctrl: int, t) -> np.ndarray:
    """Index ``i`` of the knot span with ``knots[i] <= t < knots[i+1]``.

    Spans are taken from the right at repeated knots; at the right end of the
    domain the last nonempty span is returned.
    """
    t = np.asarray(t, dtype=float)
    span = np.searchsorted(knots, t, side="right") - 1
    return np.clip(span, degree, n_ctrl - 1)


def _check_domain(curve_domain, t):
    t = np.asarray(t, dtype=float)
    lo, hi = curve_domain
    if np.any(~np.isfinite(t)) or np.any(t < lo) or np.any(t > hi):
        raise DomainError(f"parameter outside curve domain [{lo}, {hi}]")
    return t


def basis_matrix(knots, degree: int, t) -> np.ndarray:
    """Values ``N_{i,p}(t_k)`` as a ``(len(t), n_ctrl)`` matrix.

    Uses the triangular (de Boor) recurrence on the nonzero functions of each
    span, so every row sums to one.
    """
    knots = np.asarray(knots, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n_ctrl = knots.size - degree - 1
    span = find_span(knots, degree, n_ctrl, t)
    nt = t.size
    N = np.zeros((nt, degree + 1))
    N[:, 0] = 1.0
    left = np.empty((nt, degree + 1))
    right = np.empty((nt, degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = t - knots[span + 1 - j]
        right[:, j] = knots[span + j] - t
        saved = np.zeros(nt)
        for r in range(j):
            denom = right[:, r + 1] + left[:, j - r]
            temp = N[:, r] / denom
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved
    B = np.zeros((nt, n_ctrl))
    cols = span[:, None] - degree + np.arange(degree + 1)[None, :]
    np.put_along_axis(B, cols, N, axis=1)
    return B


def _difference_operator(knots, degree):
    """Matrix mapping control points to those of the derivative curve."""
    n = knots.size - degree - 1
    D = np.zeros((n - 1, n))
    for i in range(n - 1):
        h = knots[i + degree + 1] - knots[i + 1]
        if h > 0:
            D[i, i] = -degree / h
            D[i, i + 1] = degree / h
    return D


def derivative_basis_matrix(knots, degree: int, t, order: int) -> np.ndarray:
    """Matrix ``M`` such that ``M @ control_points`` is the ``order``-th derivative."""
    if order < 0 or order > degree:
        raise InvalidOrderError(f"derivative order {order} invalid for degree {degree}")
    knots = np.asarray(knots, dtype=float)
    op = np.eye(knots.size - degree - 1)
    p, kn = degree, knots
    for _ in range(order):
        op = _difference_operator(kn, p) @ op
        kn = kn[1:-1]
        p -= 1
    return basis_matrix(kn, p, t) @ op


def evaluate(curve: BSplineCurve, t):
    """Curve point(s) at parameter ``t`` (scalar or array)."""
    scalar = np.ndim(t) == 0
    t = _check_domain(curve.domain, t)
    out = basis_matrix(curve.knots, curve.degree, t) @ curve.control_points
    return out[0] if scalar else out


def derivative(curve: BSplineCurve, t, order: int = 1):
    """Exact first or second derivative with respect to the curve parameter."""
    if order not in (1, 2) or order > curve.degree:
        raise InvalidOrderError(
            f"derivative order {order} unavailable for a degree-{curve.degree} curve")
    scalar = np.ndim(t) == 0
    t = _check_domain(curve.domain, t)
    M = derivative_basis_matrix(curve.knots, curve.degree, t, order)
    out = M @ curve.control_points
    return out[0] if scalar else out


def averaged_knots(params, degree: int, n_ctrl: int) -> np.ndarray:
    """Clamped knot vector placed by averaging the data parameters.

    For interpolation (``n_ctrl == len(params)``) interior knots are running
    averages of ``degree`` consecutive parameters; for approximation they
    follow the spacing rule that puts at least one parameter in every span.
    """
    u = np.asarray(params, dtype=float)
    m = u.size
    n_int = n_ctrl - degree - 1
    interior = np.empty(max(n_int, 0))
    if n_ctrl == m:
        for j in range(1, n_int + 1):
            interior[j - 1] = u[j:j + degree].mean()
    else:
        d = m / (n_ctrl - degree)
        for j in range(1, n_int + 1):
            i = int(j * d)
            alpha = j * d - i
            interior[j - 1] = (1.0 - alpha) * u[i - 1] + alpha * u[i]
    return np.concatenate([np.full(degree + 1, u[0]), interior, np.full(degree + 1, u[-1])])


def fit_least_squares(t, y, degree: int = 3, n_ctrl: int = 10,
                      interpolate_ends: bool = True, knots=None) -> BSplineCurve:
    """Clamped spline minimizing the squared distance to samples ``(t_j, y_j)``.

    When ``interpolate_ends`` is set, the first and last control points are
    pinned to the end samples and only the interior ones are solved for.
    ``knots`` overrides the averaged knot placement.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.ndim != 1 or y.shape[0] != t.size:
        raise FitError("t and y must have the same number of samples")
    if n_ctrl <= degree:
        raise FitError(f"n_ctrl={n_ctrl} must exceed degree={degree}")
    if t.size < n_ctrl:
        raise FitError(f"underdetermined fit: {t.size} samples for {n_ctrl} control points")
    if np.any(np.diff(t) <= 0):
        raise FitError("sample parameters must be strictly increasing")
    if knots is None:
        knots = averaged_knots(t, degree, n_ctrl)
    A = basis_matrix(knots, degree, t)
    rhs = y.reshape(t.size, -1)
    if interpolate_ends:
        Q = np.zeros((n_ctrl, rhs.shape[1]))
        Q[0], Q[-1] = rhs[0], rhs[-1]
        rhs = rhs - A[:, [0, -1]] @ Q[[0, -1]]
        A = A[:, 1:-1]
    if A.shape[1]:
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise FitError(f"rank-deficient fit (condition number {cond:.3g})", cond)
        sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    else:
        sol = np.zeros((0, rhs.shape[1]))
    if interpolate_ends:
        Q[1:-1] = sol
    else:
        Q = sol
    if y.ndim == 1:
        Q = Q[:, 0]
    return BSplineCurve(degree, knots, Q)


def displace_control_points(curve: BSplineCurve, displacements, indices) -> BSplineCurve:
    """Copy of ``curve`` with ``Q_i += delta_i`` at the given indices."""
    idx = np.asarray(indices, dtype=int).ravel()
    delta = np.asarray(displacements, dtype=float)
    if delta.shape[0] != idx.size:
        raise ValueError(f"{delta.shape[0]} displacements for {idx.size} indices")
    if np.any(idx < 0) or np.any(idx >= curve.n_ctrl):
        raise IndexError(f"control point index out of range 0..{curve.n_ctrl - 1}")
    Q = np.array(curve.control_points)
    np.add.at(Q, idx, delta.reshape((idx.size,) + Q.shape[1:]))
    return curve.with_control_points(Q)


def scan_parameters(curve: BSplineCurve, n_scan: int) -> np.ndarray:
    lo, hi = curve.domain
    return np.linspace(lo, hi, n_scan)


def count_sign_changes(values, tol: float = INFLECTION_TOL) -> np.ndarray:
    """Sign changes along the last axis, ignoring entries with ``|v| < tol``."""
    v = np.asarray(values, dtype=float)
    s = np.where(np.abs(v) < tol, 0.0, np.sign(v))
    # carry the last nonzero sign forward so zeros never count as a change
    idx = np.where(s != 0, np.arange(s.shape[-1]), 0)
    idx = np.maximum.accumulate(idx, axis=-1)
    filled = np.take_along_axis(s, idx, axis=-1)
    prev, cur = filled[..., :-1], filled[..., 1:]
    return np.sum((prev * cur) < 0, axis=-1)


def count_inflections(curve: BSplineCurve, n_scan: int = 200) -> int:
    """Number of sign changes of the second derivative on a uniform scan."""
    if curve.degree < 2:
        raise InvalidOrderError("inflections need a curve of degree >= 2")
    if n_scan < 10:
        raise ValueError("n_scan must be at least 10")
    if curve.control_points.ndim != 1:
        raise ValueError("inflection count is defined for scalar curves")
    d2 = derivative(curve, scan_parameters(curve, n_scan), order=2)
    return int(count_sign_changes(d2))
