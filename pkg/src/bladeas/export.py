"""Tessellated surface output: binary STL and structured grid CSV."""
from __future__ import annotations

import csv
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import BladeGeometry

STL_HEADER = b"bladeas structured blade surface".ljust(80, b" ")

_STL_RECORD = np.dtype([
    ("normal", "<f4", (3,)),
    ("v", "<f4", (3, 3)),
    ("attr", "<u2"),
])


def _as_list(blades) -> list[BladeGeometry]:
    return [blades] if isinstance(blades, BladeGeometry) else list(blades)


def triangulate(grid: np.ndarray):
    """Split every grid quad in two triangles.

    Vertex order makes the normal follow (root -> tip) x (increasing
    chordwise index).  Returns ``(triangles, normals, n_degenerate)`` with
    zero-area triangles dropped.
    """
    a = grid[:-1, :-1]
    b = grid[1:, :-1]
    c = grid[1:, 1:]
    d = grid[:-1, 1:]
    tri = np.concatenate([
        np.stack([a, b, c], axis=-2).reshape(-1, 3, 3),
        np.stack([a, c, d], axis=-2).reshape(-1, 3, 3),
    ])
    # interleave so the two halves of each quad stay adjacent
    nq = tri.shape[0] // 2
    order = np.column_stack([np.arange(nq), np.arange(nq) + nq]).ravel()
    tri = tri[order]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norm = np.linalg.norm(n, axis=1)
    scale = max(float(np.abs(grid).max()), 1.0)
    ok = norm > (1e-14 * scale) ** 2
    n_bad = int(np.count_nonzero(~ok))
    return tri[ok], n[ok] / norm[ok, None], n_bad


def write_stl(blades, path) -> int:
    """Write a binary little-endian STL; returns the number of triangles written."""
    tris, normals, skipped = [], [], 0
    for blade in _as_list(blades):
        t, n, bad = triangulate(blade.grid)
        tris.append(t)
        normals.append(n)
        skipped += bad
    tri = np.concatenate(tris)
    rec = np.zeros(tri.shape[0], dtype=_STL_RECORD)
    rec["normal"] = np.concatenate(normals)
    rec["v"] = tri
    if skipped:
        warnings.warn(f"skipped {skipped} degenerate triangles", RuntimeWarning, stacklevel=2)
    with open(path, "wb") as fh:
        fh.write(STL_HEADER)
        fh.write(np.uint32(tri.shape[0]).astype("<u4").tobytes())
        fh.write(rec.tobytes())
    return int(tri.shape[0])


def read_stl(path):
    """Return ``(normals, triangles)`` from a binary STL."""
    raw = Path(path).read_bytes()
    count = int(np.frombuffer(raw, "<u4", count=1, offset=80)[0])
    rec = np.frombuffer(raw, dtype=_STL_RECORD, count=count, offset=84)
    return rec["normal"].astype(float), rec["v"].astype(float)


def write_grid_csv(blades, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["blade_id", "i", "j", "x", "y", "z"])
        for k, blade in enumerate(_as_list(blades)):
            nr, nc = blade.shape
            for i in range(nr):
                for j in range(nc):
                    w.writerow([k, i, j] + [format(v, ".17g") for v in blade.grid[i, j]])


def read_grid_csv(path) -> list[np.ndarray]:
    """Grids (one ``(n_radial, n_chordwise, 3)`` array per blade) from a grid CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    ids = np.array([[int(r[0]), int(r[1]), int(r[2])] for r in body])
    xyz = np.array([[float(v) for v in r[3:6]] for r in body])
    grids = []
    for k in range(ids[:, 0].max() + 1):
        sel = ids[:, 0] == k
        nr, nc = ids[sel, 1].max() + 1, ids[sel, 2].max() + 1
        g = np.empty((nr, nc, 3))
        g[ids[sel, 1], ids[sel, 2]] = xyz[sel]
        grids.append(g)
    return grids


def export_surface(blades: BladeGeometry | Sequence[BladeGeometry], fmt: str, path) -> None:
    if fmt == "stl":
        write_stl(blades, path)
    elif fmt == "grid-csv":
        write_grid_csv(blades, path)
    else:
        raise ValueError(f"unknown export format {fmt!r} (use 'stl' or 'grid-csv')")
