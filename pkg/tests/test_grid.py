from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imexilw.errors import (
    GeometryError,
    GeometryOverlap,
    InvalidEta,
    MissingGhostData,
    ObstacleOutsideDomain,
    TooFewNodes,
)
from imexilw.grid import (
    GHOST,
    INTERIOR,
    NG,
    UNUSED,
    GridField,
    build_grid_1d,
    build_grid_2d,
    ghosts_for_face,
)

EX7 = ((0, 10, 0, 10), [(1, 3, 0, 3), (5, 10, 0, 5)])


def test_grid1d_paper_mesh():
    g = build_grid_1d(0.0, 1.0, 20)
    assert g.dx == pytest.approx(1 / 20, abs=1e-15)
    assert g.x[0] == pytest.approx(g.dx / 2)
    assert g.x[1] == pytest.approx(3 / 40)
    assert g.x[-1] == pytest.approx(1 - g.dx / 2)
    # boundary strictly between the last ghost and the first node
    assert g.x_ext[NG - 1] < 0.0 < g.x_ext[NG]


@given(st.integers(6, 200), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_grid1d_offsets(N, el, er):
    g = build_grid_1d(-1.0, 2.0, N, el, er)
    assert g.x[0] == pytest.approx(-1.0 + el * g.dx)
    assert g.x[-1] == pytest.approx(2.0 - er * g.dx)
    np.testing.assert_allclose(np.diff(g.x_ext), g.dx)


@pytest.mark.parametrize("eta", [0.0, 1.0, -0.2])
def test_grid1d_invalid_eta(eta):
    with pytest.raises(InvalidEta):
        build_grid_1d(0, 1, 20, eta)


def test_grid1d_too_few_nodes():
    with pytest.raises(TooFewNodes):
        build_grid_1d(0, 1, 5)


def test_grid1d_stations():
    g = build_grid_1d(0, 1, 10)
    left, right = g.side_stations("left"), g.side_stations("right")
    np.testing.assert_allclose(left.ghost_xi(g.dx)[:, 0], [-g.dx / 2, -3 * g.dx / 2])
    assert g.x_ext[right.line[0, 0]] == pytest.approx(g.x[-1])
    assert g.x_ext[right.ghosts[0, 0]] == pytest.approx(1 + g.dx / 2)
    with pytest.raises(GeometryError):
        g.side_stations("top")


def test_unit_square_mask():
    g = build_grid_2d((0, 1, 0, 1), (), 1 / 20, 0.5)
    assert (g.nx, g.ny) == (20, 20)
    assert int(np.sum(g.mask == INTERIOR)) == 400
    # two-deep ring without the 4x4 corner blocks
    assert int(np.sum(g.mask == GHOST)) == 4 * 2 * 20
    assert int(np.sum(g.mask == UNUSED)) == 16


def test_example7_interior_count():
    dom, obs = EX7
    dx = 1 / 20
    g = build_grid_2d(dom, obs, dx, 0.5)
    X, Y = g.coords
    inside = (X > 0) & (X < 10) & (Y > 0) & (Y < 10)
    for x0, x1, y0, y1 in obs:
        inside &= ~((X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1))
    np.testing.assert_array_equal(g.interior, inside)
    assert {"obstacle0:left", "obstacle0:right", "obstacle0:top", "obstacle1:left", "obstacle1:top"} <= set(g.faces())


def test_ghosts_outside_fluid():
    dom, obs = EX7
    g = build_grid_2d(dom, obs, 1 / 10, 0.5)
    X, Y = g.coords
    for face in g.faces():
        for info in ghosts_for_face(g, face):
            assert g.mask[info.index] == GHOST
            assert 0.0 < info.delta <= 2 * g.dx
            x, y = info.P
            in_dom = 0 < x < 10 and 0 < y < 10
            in_obs = any(a <= x <= b and c <= y <= d for a, b, c, d in obs)
            assert not in_dom or in_obs


def test_ghost_geometry_bottom():
    g = build_grid_2d((0, 1, 0, 1), (), 0.1, 0.5)
    first = ghosts_for_face(g, "bottom")[0]
    assert first.P0[1] == 0.0 and first.P0[0] == pytest.approx(first.P[0])
    assert first.theta == pytest.approx(-math.pi / 2)
    assert first.delta == pytest.approx(0.05)
    left = ghosts_for_face(g, "left")[0]
    assert left.theta == pytest.approx(math.pi)


def test_mask_symmetry():
    g = build_grid_2d((0, 2, 0, 2), (), 0.1, 0.5)
    np.testing.assert_array_equal(g.mask, g.mask[::-1, :])
    np.testing.assert_array_equal(g.mask, g.mask[:, ::-1])
    np.testing.assert_array_equal(g.mask, g.mask.T)


def test_obstacle_errors():
    with pytest.raises(ObstacleOutsideDomain):
        build_grid_2d((0, 1, 0, 1), [(0.5, 1.5, 0, 0.5)], 0.05)
    with pytest.raises(GeometryOverlap):
        build_grid_2d((0, 2, 0, 2), [(0, 1, 0, 1), (0.5, 1.5, 0, 1)], 0.05)


def test_station_subset_keeps_faces():
    g = build_grid_2d(*EX7, 1 / 10)
    st = next(s for s in g.stations if len(set(s.faces)) > 1)
    name = st.faces[0]
    keep = np.array([f == name for f in st.faces])
    sub = st.subset(keep)
    assert set(sub.faces) == {name}
    assert sub.size == int(keep.sum())


def test_gridfield_debug():
    g = build_grid_2d((0, 1, 0, 1), (), 0.1)
    f = GridField(g, 5, np.ones((5,) + g.shape), debug=True)
    assert np.isnan(f.data[:, g.mask == UNUSED]).all()
    assert f.interior.shape == (5, 100)
    f.invalidate_ghosts()
    with pytest.raises(MissingGhostData):
        f.check_ghosts()
