"""Normalized design space over pitch and camber control-point displacements.

A design ``mu`` lives in ``[-1, 1]^m``.  The first half of its entries move
the pitch control points (root to tip), the second half the maximum-camber
control points.  Entry ``k`` displaces its control point by ``mu_k`` times
the curve bound, a fixed fraction of the baseline maximum.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, SamplingError
from .geometry import RadialDistributions
from .spline import (INFLECTION_TOL, BSplineCurve, count_sign_changes,
                     derivative_basis_matrix, scan_parameters)

PITCH_FRACTION = 0.15
CAMBER_FRACTION = 0.20
N_SCAN = 200
MAX_DRAWS = 10**6
MAX_REJECTION = 0.99


def _curve_max(curve: BSplineCurve, n: int = 2001) -> float:
    return float(np.max(curve(scan_parameters(curve, n))))


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator; streams are stable across platforms."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True, eq=False)
class ParameterSpace:
    baseline: RadialDistributions
    pitch_indices: tuple = tuple(range(10))
    camber_indices: tuple = tuple(range(10))
    pitch_fraction: float = PITCH_FRACTION
    camber_fraction: float = CAMBER_FRACTION
    n_scan: int = N_SCAN
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name, idx, curve in (("pitch", self.pitch_indices, self.baseline.pitch),
                                 ("camber", self.camber_indices, self.baseline.max_camber)):
            idx = tuple(int(i) for i in idx)
            if len(set(idx)) != len(idx):
                raise ValueError(f"{name} indices must be distinct")
            if any(i < 0 or i >= curve.n_ctrl for i in idx):
                raise ValueError(f"{name} index outside 0..{curve.n_ctrl - 1}")
            object.__setattr__(self, f"{name}_indices", idx)
        if self.pitch_bound <= 0 or self.camber_bound <= 0:
            raise ValueError("displacement bounds must be strictly positive")

    @classmethod
    def default(cls, baseline: RadialDistributions, m: int = 20) -> "ParameterSpace":
        if m % 2 or m // 2 > min(baseline.pitch.n_ctrl, baseline.max_camber.n_ctrl):
            raise ValueError(f"m={m} must be even and at most twice the control-point count")
        idx = tuple(range(m // 2))
        return cls(baseline, idx, idx)

    @property
    def m(self) -> int:
        return len(self.pitch_indices) + len(self.camber_indices)

    @property
    def n_pitch(self) -> int:
        return len(self.pitch_indices)

    @property
    def pitch_bound(self) -> float:
        return self.pitch_fraction * _curve_max(self.baseline.pitch)

    @property
    def camber_bound(self) -> float:
        return self.camber_fraction * _curve_max(self.baseline.max_camber)

    def labels(self) -> list[str]:
        return ([f"pitch - {k + 1}" for k in range(self.n_pitch)]
                + [f"camber - {k + 1}" for k in range(self.m - self.n_pitch)])

    def _check(self, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)
        if mu.shape[-1] != self.m:
            raise BoundsError(f"design has {mu.shape[-1]} entries, space has m={self.m}")
        if np.any(~np.isfinite(mu)) or np.any(np.abs(mu) > 1.0):
            raise BoundsError("design components must lie in [-1, 1]")
        return mu

    def control_points(self, mu):
        """Deformed pitch and camber control points for one or many designs."""
        mu = self._check(mu)
        qp = np.broadcast_to(self.baseline.pitch.control_points,
                             mu.shape[:-1] + (self.baseline.pitch.n_ctrl,)).copy()
        qc = np.broadcast_to(self.baseline.max_camber.control_points,
                             mu.shape[:-1] + (self.baseline.max_camber.n_ctrl,)).copy()
        qp[..., list(self.pitch_indices)] += mu[..., :self.n_pitch] * self.pitch_bound
        qc[..., list(self.camber_indices)] += mu[..., self.n_pitch:] * self.camber_bound
        return qp, qc

    def baseline_hash(self) -> str:
        h = hashlib.sha256()
        for c in self.baseline.curves().values():
            h.update(c.to_text().encode())
        h.update(repr((self.baseline.radius, self.baseline.hub_radius,
                       self.baseline.n_blades)).encode())
        return h.hexdigest()

    # second-derivative operators on the scan grid, shared by every check
    def _d2(self, which: str) -> np.ndarray:
        if which not in self._cache:
            curve = getattr(self.baseline, which)
            M = derivative_basis_matrix(curve.knots, curve.degree,
                                        scan_parameters(curve, self.n_scan), 2)
            base = int(count_sign_changes(M @ curve.control_points))
            self._cache[which] = (M, base)
        return self._cache[which]


def apply_parameters(space: ParameterSpace, mu) -> RadialDistributions:
    """Baseline distributions with pitch and camber control points displaced."""
    qp, qc = space.control_points(mu)
    b = space.baseline
    return b.replace_curves(pitch=b.pitch.with_control_points(qp),
                            max_camber=b.max_camber.with_control_points(qc))


def _screen(space: ParameterSpace, mu):
    """Batched smoothness verdicts plus a flag for rows far from the tolerance.

    Batched products may round differently from the single-design path in
    the last bit; that only matters where some ``|d2|`` sits next to the
    inflection tolerance, so other rows need no confirmation.
    """
    mu = np.atleast_2d(space._check(mu))
    qp, qc = space.control_points(mu)
    ok = np.ones(mu.shape[0], dtype=bool)
    safe = np.ones(mu.shape[0], dtype=bool)
    for q, which in ((qp, "pitch"), (qc, "max_camber")):
        M, base = space._d2(which)
        d2 = q @ M.T
        ok &= count_sign_changes(d2) <= base
        margin = 1e-9 * max(float(np.max(np.abs(d2))), INFLECTION_TOL)
        safe &= np.all(np.abs(np.abs(d2) - INFLECTION_TOL) > margin, axis=-1)
    return ok, safe


def smooth_mask(space: ParameterSpace, mu) -> np.ndarray:
    """Vectorized smoothness filter over a ``(n, m)`` batch of designs."""
    mu = np.atleast_2d(mu)
    ok, safe = _screen(space, mu)
    for k in np.flatnonzero(~safe):
        ok[k] = smoothness_filter(space, mu[k])
    return ok


def smoothness_filter(space: ParameterSpace, mu) -> bool:
    """True when neither deformed curve gains inflections over the baseline.

    Same arithmetic as :func:`count_inflections` on the deformed curves.
    """
    qp, qc = space.control_points(mu)
    if qp.ndim != 1:
        raise ValueError("smoothness_filter takes a single design; use smooth_mask")
    Mp, base_p = space._d2("pitch")
    Mc, base_c = space._d2("max_camber")
    return bool(count_sign_changes(Mp @ qp) <= base_p
                and count_sign_changes(Mc @ qc) <= base_c)


@dataclass(frozen=True)
class DesignBatch:
    mu: np.ndarray
    seed: int
    method: str
    redraws: int

    def __len__(self):
        return self.mu.shape[0]


def _rejection(space, n, rng, batch=4096):
    out, accepted, drawn = [], 0, 0
    while accepted < n:
        mu = rng.uniform(-1.0, 1.0, size=(batch, space.m))
        ok = smooth_mask(space, mu)
        take = mu[ok][: n - accepted]
        # count draws up to and including the last accepted one
        used = batch if take.shape[0] == ok.sum() else int(np.flatnonzero(ok)[n - accepted - 1]) + 1
        drawn += used
        accepted += take.shape[0]
        out.append(take)
        if accepted < n and drawn >= MAX_DRAWS and accepted / drawn < 1.0 - MAX_REJECTION:
            raise SamplingError(
                f"smoothness filter rejected {drawn - accepted} of {drawn} draws; "
                "displacement bounds are inconsistent with smooth profiles")
    return np.concatenate(out), drawn - n


def hit_and_run(is_feasible, x0, n: int, rng: np.random.Generator,
                burn_in: int = 500, thin: int = 100, confirm=None):
    """Markov chain uniform on ``{x in [-1, 1]^m : is_feasible(x)}``.

    Each step picks a random direction and draws a point on the box chord
    through the current state, shrinking the chord towards the current point
    after every infeasible proposal.  States are emitted every ``thin`` steps
    once they also pass ``confirm`` (defaults to ``is_feasible``).
    Returns ``(samples, rejected)``.
    """
    confirm = confirm or is_feasible
    x = np.array(x0, dtype=float)
    if not (is_feasible(x) and confirm(x)):
        raise SamplingError("hit-and-run start point is infeasible")
    m = x.size
    out = np.empty((n, m))
    rejected = 0
    emitted = 0
    step = 0
    while emitted < n:
        d = rng.standard_normal(m)
        d /= np.linalg.norm(d)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (1.0 - x) / d
            t2 = (-1.0 - x) / d
        hi = float(np.min(np.maximum(t1, t2)))
        lo = float(np.max(np.minimum(t1, t2)))
        while True:
            t = rng.uniform(lo, hi)
            y = np.clip(x + t * d, -1.0, 1.0)
            if is_feasible(y):
                x = y
                break
            rejected += 1
            if t < 0:
                lo = t
            else:
                hi = t
        step += 1
        if step > burn_in and (step - burn_in) >= thin * (emitted + 1) and confirm(x):
            out[emitted] = x
            emitted += 1
    return out, rejected


def _fast_checker(space: ParameterSpace):
    """Smoothness test through precomputed affine maps ``mu -> d2``."""
    blocks = []
    for which, cols, idx, bound in (
            ("pitch", slice(0, space.n_pitch), space.pitch_indices, space.pitch_bound),
            ("max_camber", slice(space.n_pitch, space.m), space.camber_indices,
             space.camber_bound)):
        M, base = space._d2(which)
        d2_0 = M @ getattr(space.baseline, which).control_points
        blocks.append((cols, d2_0, M[:, list(idx)] * bound, base))

    def check(mu):
        for cols, d2_0, lin, base in blocks:
            d2 = d2_0 + lin @ mu[cols]
            if base == 0:
                if np.any(d2 >= INFLECTION_TOL) and np.any(d2 <= -INFLECTION_TOL):
                    return False
            elif count_sign_changes(d2) > base:
                return False
        return True
    return check


def sample_designs(space: ParameterSpace, n: int, seed: int, method: str = "auto",
                   burn_in: int = 500, thin: int = 100, pilot: int = 10_000) -> DesignBatch:
    """Draw ``n`` smooth designs uniformly on ``[-1, 1]^m`` restricted to smooth profiles.

    ``"rejection"`` redraws rejected candidates.  ``"hit-and-run"`` runs a
    Markov chain started at the baseline; use it when smooth designs are too
    rare for redrawing.  ``"auto"`` estimates the acceptance rate on a pilot
    batch and picks rejection when at least 1% of draws pass.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if method == "auto":
        probe = make_rng(seed).uniform(-1.0, 1.0, size=(pilot, space.m))
        rate = _screen(space, probe)[0].mean()
        method = "rejection" if rate >= 1.0 - MAX_REJECTION else "hit-and-run"
    rng = make_rng(seed)
    if method == "rejection":
        mu, redraws = _rejection(space, n, rng)
    elif method == "hit-and-run":
        mu, redraws = hit_and_run(_fast_checker(space), np.zeros(space.m), n, rng,
                                  burn_in, thin,
                                  confirm=lambda x: smoothness_filter(space, x))
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return DesignBatch(mu, int(seed), method, int(redraws))
