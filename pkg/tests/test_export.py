import struct
import warnings

import numpy as np
import pytest

from bladeas.export import (STL_HEADER, export_surface, read_grid_csv, read_stl, triangulate,
                            write_grid_csv, write_stl)
from bladeas.geometry import BladeGeometry, loft_blade, replicate_propeller


def plate(nr=2, nc=2):
    r = np.linspace(1.0, 2.0, nr)
    c = np.linspace(0.0, 1.0, nc)
    g = np.stack(np.meshgrid(c, r), axis=-1)
    grid = np.concatenate([np.zeros(g.shape[:2] + (1,)), g[..., ::-1]], axis=-1)
    return BladeGeometry(grid, r)


def test_two_by_two(tmp_path):
    p = tmp_path / "q.stl"
    assert write_stl(plate(), p) == 2
    raw = p.read_bytes()
    assert raw[:80] == STL_HEADER
    assert struct.unpack("<I", raw[80:84])[0] == 2
    assert len(raw) == 84 + 2 * 50


def test_triangle_count_and_normals(tmp_path, baseline):
    blade = loft_blade(baseline, n_radial=7)
    nr, nc = blade.shape
    p = tmp_path / "b.stl"
    n = write_stl(blade, p)
    assert n == 2 * (nr - 1) * (nc - 1)
    normals, tri = read_stl(p)
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    cross /= np.linalg.norm(cross, axis=1, keepdims=True)
    # vertices are stored as float32, so compare directions loosely
    assert np.all(np.sum(normals * cross, axis=1) > 0.999)
    np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-6)


def test_normal_orientation():
    # root->tip along +y, chordwise along +z: right-hand rule gives +x
    _, normals, _ = triangulate(plate(3, 4).grid)
    np.testing.assert_allclose(normals, np.tile([1.0, 0.0, 0.0], (normals.shape[0], 1)))


def test_degenerate_quads_skipped(tmp_path):
    g = plate(2, 3).grid.copy()
    g[1, 0] = g[0, 0]
    g[1, 1] = g[0, 1]
    with pytest.warns(RuntimeWarning, match="degenerate"):
        n = write_stl(BladeGeometry(g, np.array([1.0, 2.0])), tmp_path / "d.stl")
    # quad 0 collapses completely, quad 1 keeps one triangle
    assert n == 1


def test_grid_csv_round_trip(tmp_path, baseline):
    blades = replicate_propeller(loft_blade(baseline, n_radial=5), 3)
    p = tmp_path / "g.csv"
    write_grid_csv(blades, p)
    back = read_grid_csv(p)
    assert len(back) == 3
    for a, b in zip(blades, back):
        assert np.array_equal(a.grid, b)
    assert p.read_text().splitlines()[0] == "blade_id,i,j,x,y,z"


def test_export_dispatch(tmp_path):
    export_surface(plate(), "stl", tmp_path / "a.stl")
    export_surface(plate(), "grid-csv", tmp_path / "a.csv")
    with pytest.raises(ValueError):
        export_surface(plate(), "iges", tmp_path / "a.igs")
    with pytest.raises(OSError):
        export_surface(plate(), "stl", tmp_path / "missing" / "a.stl")


def test_stl_bytes_deterministic(tmp_path, baseline):
    blades = replicate_propeller(loft_blade(baseline, n_radial=6), 5)
    write_stl(blades, tmp_path / "1.stl")
    write_stl(blades, tmp_path / "2.stl")
    assert (tmp_path / "1.stl").read_bytes() == (tmp_path / "2.stl").read_bytes()
