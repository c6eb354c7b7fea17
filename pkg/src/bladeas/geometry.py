"""Bottom-up blade construction from radial distributions.

Sections are scaled by the local chord, shifted chordwise by skew, rotated by
the pitch angle, shifted axially by rake and finally wrapped onto the
cylinder of their radius.  The propeller axis is ``x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .airfoil import AirfoilSection, naca4_section, scale_max_camber
from .errors import DomainError, GeometryError, ParseError
from .spline import BSplineCurve, fit_least_squares

CURVE_NAMES = ("chord", "pitch", "skew", "rake", "max_camber")
DEFAULT_SECTION = "2412"


@dataclass(frozen=True, eq=False)
class RadialDistributions:
    """Five radial curves over ``r/R``.

    ``chord``, ``pitch``, ``skew`` and ``rake`` are lengths in metres;
    ``max_camber`` is chord-normalized.
    """

    chord: BSplineCurve
    pitch: BSplineCurve
    skew: BSplineCurve
    rake: BSplineCurve
    max_camber: BSplineCurve
    radius: float
    hub_radius: float
    n_blades: int = 5

    def __post_init__(self):
        if not 0 < self.hub_radius < self.radius:
            raise GeometryError("need 0 < hub radius < blade radius")
        if self.n_blades < 1:
            raise GeometryError("n_blades must be >= 1")
        domains = {c.domain for c in self.curves().values()}
        if len(domains) != 1:
            raise GeometryError("all radial curves must share one parameter domain")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def domain(self) -> tuple[float, float]:
        return self.chord.domain

    def curves(self) -> dict[str, BSplineCurve]:
        return {name: getattr(self, name) for name in CURVE_NAMES}

    def replace_curves(self, **curves) -> "RadialDistributions":
        return replace(self, **curves)

    def sample(self, r_over_R) -> dict[str, np.ndarray]:
        return {name: c(r_over_R) for name, c in self.curves().items()}


@dataclass(frozen=True, eq=False)
class BladeGeometry:
    grid: np.ndarray
    section_radii: np.ndarray

    @property
    def shape(self):
        return self.grid.shape[:2]


@dataclass(frozen=True)
class BaselineTable:
    """Tabulated blade data as read from a baseline file (nondimensional)."""

    r_over_R: np.ndarray
    chord_D: np.ndarray
    pitch_D: np.ndarray
    skew_D: np.ndarray
    rake_D: np.ndarray
    max_camber: np.ndarray
    comments: list = field(default_factory=list)


def bundled_baseline_path() -> Path:
    return Path(__file__).parent / "data" / "baseline_blade.txt"


def read_baseline_table(path) -> BaselineTable:
    """Parse a whitespace-separated table ``r/R chord/D P/D skew/D rake/D f/c``."""
    rows, comments = [], []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line, _, comment = raw.partition("#")
        if comment.strip():
            comments.append(comment.strip())
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(f"expected 6 columns, got {len(parts)}", lineno)
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise ParseError(f"non-numeric entry in {line!r}", lineno) from None
    data = np.array(rows)
    if data.shape[0] < 4:
        raise ParseError("baseline table needs at least 4 stations")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ParseError("r/R column must increase strictly")
    return BaselineTable(*(data[:, k].copy() for k in range(6)), comments=comments)


def fit_distributions(table: BaselineTable, diameter: float, n_blades: int = 5,
                      degree: int = 3, n_ctrl: int = 10) -> RadialDistributions:
    """Reconstruct all five radial curves by end-constrained least squares."""
    R = 0.5 * diameter
    r = table.r_over_R
    if r[-1] != 1.0:
        raise GeometryError("baseline table must end at the tip (r/R = 1)")
    columns = {
        "chord": table.chord_D * diameter,
        "pitch": table.pitch_D * diameter,
        "skew": table.skew_D * diameter,
        "rake": table.rake_D * diameter,
        "max_camber": table.max_camber,
    }
    curves = {name: fit_least_squares(r, y, degree, n_ctrl, interpolate_ends=True)
              for name, y in columns.items()}
    return RadialDistributions(**curves, radius=R, hub_radius=r[0] * R, n_blades=n_blades)


def load_baseline(path=None, diameter: float = 0.25, n_blades: int = 5,
                  n_ctrl: int = 10) -> RadialDistributions:
    return fit_distributions(read_baseline_table(path or bundled_baseline_path()),
                             diameter, n_blades, n_ctrl=n_ctrl)


def pitch_angle(pitch: float, r: float) -> float:
    """Screw angle ``atan(P / (2 pi r))`` in radians."""
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r}")
    return math.atan(pitch / (2.0 * math.pi * r))


def place_section(section: AirfoilSection, r: float, chord: float, pitch: float,
                  skew: float = 0.0, rake: float = 0.0, points=None) -> np.ndarray:
    """Position one section on the cylinder of radius ``r``.

    Returns an ``(n, 3)`` array of ``(X, Y, Z)`` with ``X`` along the axis.
    ``points`` overrides the chordwise surface loop of ``section``.
    """
    if not chord > 0:
        raise GeometryError(f"chord must be positive, got {chord}")
    phi = pitch_angle(pitch, r)
    if abs(skew + chord) >= 2.0 * math.pi * r:
        raise GeometryError(f"section at r={r} would wrap a full turn")
    pts = section.surface_points() if points is None else np.asarray(points, dtype=float)
    xi = (pts[:, 0] - 0.5) * chord + skew
    eta = pts[:, 1] * chord
    c, s = math.cos(phi), math.sin(phi)
    u = xi * c - eta * s
    v = xi * s + eta * c
    theta = u / r
    return np.column_stack([rake + v, r * np.cos(theta), r * np.sin(theta)])


def loft_blade(distributions: RadialDistributions,
               base_sections: AirfoilSection | Sequence[AirfoilSection] | None = None,
               n_radial: int = 30) -> BladeGeometry:
    """Sample the radial curves root to tip and stack the placed sections."""
    if n_radial < 2:
        raise ValueError("n_radial must be >= 2")
    if base_sections is None:
        base_sections = naca4_section(DEFAULT_SECTION)
    if isinstance(base_sections, AirfoilSection):
        base_sections = [base_sections] * n_radial
    if len(base_sections) != n_radial:
        raise ValueError(f"{len(base_sections)} base sections for {n_radial} stations")
    lo, hi = distributions.domain
    rr = np.linspace(lo, hi, n_radial)
    vals = distributions.sample(rr)
    radii = rr * distributions.radius
    if np.any(vals["chord"] <= 0):
        bad = int(np.argmax(vals["chord"] <= 0))
        raise GeometryError(f"nonpositive chord at station {bad} (r/R={rr[bad]:.4f})")
    rows = []
    for i, r in enumerate(radii):
        sec = scale_max_camber(base_sections[i], max(float(vals["max_camber"][i]), 0.0))
        rows.append(place_section(sec, float(r), float(vals["chord"][i]),
                                  float(vals["pitch"][i]), float(vals["skew"][i]),
                                  float(vals["rake"][i])))
    return BladeGeometry(np.stack(rows), radii)


def rotation_about_axis(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def replicate_propeller(blade: BladeGeometry, n_blades: int) -> list[BladeGeometry]:
    """Copies of ``blade`` rotated by ``2 pi k / n_blades`` about the axis."""
    if n_blades < 1:
        raise ValueError("n_blades must be >= 1")
    out = [blade]
    for k in range(1, n_blades):
        rot = rotation_about_axis(2.0 * math.pi * k / n_blades)
        out.append(BladeGeometry(blade.grid @ rot.T, blade.section_radii))
    return out
