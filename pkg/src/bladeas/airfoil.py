"""Two-dimensional blade sections: camber line plus half-thickness."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CannotScaleError, InvalidCodeError, ParseError


@dataclass(frozen=True, eq=False)
class AirfoilSection:
    """Chord-normalized section.

    ``x`` runs from the leading edge (0) to the trailing edge (1).  Upper and
    lower surfaces are ``camber +/- half_thickness`` (thin-section convention).
    """

    x: np.ndarray
    camber: np.ndarray
    half_thickness: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        yc = np.array(self.camber, dtype=float)
        yt = np.array(self.half_thickness, dtype=float)
        if not (x.ndim == 1 and x.shape == yc.shape == yt.shape and x.size >= 2):
            raise ValueError("x, camber and half_thickness must be 1D arrays of equal length")
        if np.any(np.diff(x) <= 0) or x[0] != 0.0 or x[-1] != 1.0:
            raise ValueError("stations must increase strictly from 0 to 1")
        if np.any(yt < 0):
            raise ValueError("half thickness must be nonnegative")
        if yc[0] != 0.0:
            raise ValueError("camber line must start at zero")
        for arr in (x, yc, yt):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "camber", yc)
        object.__setattr__(self, "half_thickness", yt)

    @property
    def max_camber(self) -> float:
        return float(np.max(np.abs(self.camber)))

    @property
    def upper(self) -> np.ndarray:
        return np.column_stack([self.x, self.camber + self.half_thickness])

    @property
    def lower(self) -> np.ndarray:
        return np.column_stack([self.x, self.camber - self.half_thickness])

    def surface_points(self) -> np.ndarray:
        """Closed-loop ordering TE -> upper -> LE -> lower -> TE, ``2n - 1`` points."""
        return np.vstack([self.upper[::-1], self.lower[1:]])


def cosine_stations(n_points: int) -> np.ndarray:
    x = 0.5 * (1.0 - np.cos(np.linspace(0.0, np.pi, n_points)))
    x[0], x[-1] = 0.0, 1.0
    return x


def naca4_camber(x, m: float, p: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if m == 0.0:
        return np.zeros_like(x)
    fore = m / p**2 * (2 * p * x - x**2)
    aft = m / (1 - p) ** 2 * ((1 - 2 * p) + 2 * p * x - x**2)
    return np.where(x < p, fore, aft)


def naca4_half_thickness(x, t: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return 5 * t * (0.2969 * np.sqrt(x) - 0.1260 * x - 0.3516 * x**2
                    + 0.2843 * x**3 - 0.1015 * x**4)


def naca4_section(code: str, n_points: int = 60) -> AirfoilSection:
    """NACA 4-digit section ``mptt`` on cosine-spaced stations.

    The station nearest the maximum-camber position is moved onto it so the
    sampled camber peak equals the nominal ``m``.
    """
    code = str(code).strip()
    if len(code) != 4 or not code.isdigit():
        raise InvalidCodeError(f"NACA 4-digit code expected, got {code!r}")
    if n_points < 20:
        raise ValueError("n_points must be at least 20")
    m = int(code[0]) / 100.0
    p = int(code[1]) / 10.0
    t = int(code[2:]) / 100.0
    if p == 0.0 and m != 0.0:
        raise InvalidCodeError(f"{code}: nonzero camber needs a nonzero camber position")
    x = cosine_stations(n_points)
    if m != 0.0:
        x[np.argmin(np.abs(x - p))] = p
    return AirfoilSection(x, naca4_camber(x, m, p), naca4_half_thickness(x, t))


def scale_max_camber(section: AirfoilSection, target: float) -> AirfoilSection:
    """Rescale the camber line so that its peak deflection equals ``target``.

    The thickness array is reused untouched.
    """
    if target < 0:
        raise ValueError("target camber must be nonnegative")
    current = section.max_camber
    if current == target:
        return section
    if current == 0.0:
        if target > 0:
            raise CannotScaleError("section has no camber line to scale")
        return section
    camber = section.camber * (target / current)
    return AirfoilSection(section.x, camber, section.half_thickness)


def read_section(path) -> AirfoilSection:
    """Read a section table with columns ``x camber half_thickness``.

    Columns may be separated by whitespace or commas; blank lines and ``#``
    comments are ignored.
    """
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 3:
            raise ParseError(f"expected 3 columns, got {len(parts)}", lineno)
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise ParseError(f"non-numeric entry in {line!r}", lineno) from None
    data = np.array(rows)
    if data.shape[0] < 2:
        raise ParseError("section file needs at least two stations")
    return AirfoilSection(data[:, 0], data[:, 1], data[:, 2])
