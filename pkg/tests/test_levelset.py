from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lsjunction.contour import NoInterfaceError, extract_contour
from lsjunction.grid import Grid2, ScalarField, bilinear, godunov_gradient_norm
from lsjunction.levelset import (InterfaceGeometry, Phase, circle_geometry, curvature, distance_to_segments,
                                 heaviside_smoothed, init_signed_distance, reinitialize, reinitialize_array)
from lsjunction.scenarios import garcke_geometries


def box(h=0.01):
    return Grid2.from_extent(0.0, 1.0, 0.0, 1.0, h)


def contour_segments(f):
    c = extract_contour(f)
    out = []
    for p, closed in zip(c.polylines, c.closed):
        q = np.vstack([p, p[:1]]) if closed else p
        out.append(np.column_stack([q[:-1], q[1:]]))
    s = np.concatenate(out)
    # crossings exactly at a node produce repeated vertices
    return s[np.hypot(s[:, 2] - s[:, 0], s[:, 3] - s[:, 1]) > 0]


def test_circle_signed_distance():
    g = box(0.02)
    psi = init_signed_distance(circle_geometry(0.5, 0.5, 0.25, n=4096), g)
    X, Y = g.coords()
    d = np.hypot(X - 0.5, Y - 0.5)
    assert np.allclose(psi.values, 0.25 - d, atol=1e-5)


def test_garcke_initial_distances():
    g = Grid2.from_extent(-0.5, 0.5, 0.0, 2.0, 0.05)
    g0, g1, _ = garcke_geometries(1.0, 0.5)
    p0 = init_signed_distance(g0, g)
    p1 = init_signed_distance(g1, g)
    i, j = g.node_of(0.25, 0.7)
    assert p0.values[i, j] == pytest.approx(0.2, abs=1e-12)
    i, j = g.node_of(-0.1, 0.3)
    assert p1.values[i, j] == pytest.approx(0.1, abs=1e-12)


def test_degenerate_geometry_rejected():
    with pytest.raises(ValueError):
        InterfaceGeometry((np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]),), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        InterfaceGeometry((np.array([[0.0, 0.0]]),), np.zeros((3, 2)))


def test_reinitialize_fixed_point_for_a_line():
    g = box()
    X, Y = g.coords()
    n = np.array([-0.5, 1.0]) / math.hypot(1, 0.5)
    d = (Y - 0.5 * X - 0.2) / math.hypot(1, 0.5)
    band = 20 * g.dx
    out = reinitialize(ScalarField(g, d), band).values
    # the extracted line ends at the walls: only nodes whose foot point lies inside count
    fx, fy = X - d * n[0], Y - d * n[1]
    inside = (np.abs(d) <= band) & (fx >= 0) & (fx <= 1) & (fy >= 0) & (fy <= 1)
    assert np.abs(out - d)[inside].max() <= g.dx ** 2
    assert np.all(np.abs(out) <= band + 1e-15)


def test_reinitialize_doubled_distance():
    g = box()
    X, Y = g.coords()
    exact = 0.3 - np.hypot(X - 0.5, Y - 0.5)
    out = reinitialize(ScalarField(g, 2 * exact)).values
    band = np.abs(exact) <= 20 * g.dx
    # second-order accurate against the analytic distance
    assert np.abs(out - exact)[band].max() <= g.dx ** 2


def test_reinitialize_polygon_matches_exact_distance():
    # straight boundary pieces meeting at corners: the arc correction must stay off
    g = box()
    X, Y = g.coords()
    sq = np.minimum(np.minimum(X - 0.253, 0.747 - X), np.minimum(Y - 0.253, 0.747 - Y))
    inside_rect = (np.abs(X - 0.5) <= 0.247) & (np.abs(Y - 0.5) <= 0.247)
    ox = np.maximum(np.abs(X - 0.5) - 0.247, 0.0)
    oy = np.maximum(np.abs(Y - 0.5) - 0.247, 0.0)
    exact = np.where(inside_rect, sq, -np.hypot(ox, oy))
    out = reinitialize(ScalarField(g, 3 * exact)).values
    # nodes whose foot point lies well away from the corners see an exact distance
    lo, hi = 0.253, 0.747
    fx, fy = np.clip(X, lo, hi), np.clip(Y, lo, hi)
    d_side = np.stack([X - lo, hi - X, Y - lo, hi - Y])
    side = np.argmin(d_side, axis=0)
    fx = np.where(inside_rect & (side == 0), lo, np.where(inside_rect & (side == 1), hi, fx))
    fy = np.where(inside_rect & (side == 2), lo, np.where(inside_rect & (side == 3), hi, fy))
    corner_gap = np.minimum(np.minimum(np.abs(fx - lo), np.abs(fx - hi)), np.minimum(np.abs(fy - lo), np.abs(fy - hi)))
    on_one_side = np.maximum(np.minimum(np.abs(fx - lo), np.abs(fx - hi)), np.minimum(np.abs(fy - lo), np.abs(fy - hi)))
    band = (np.abs(exact) <= 20 * g.dx) & (on_one_side > 2 * g.dx) & (corner_gap < 1e-12)
    assert np.abs(out - exact)[band].max() < 1e-9


def test_reinitialize_restores_gradient_in_band():
    g = box()
    X, Y = g.coords()
    r = np.hypot(X - 0.5, Y - 0.5)
    d = 0.3 - r
    theta = np.arctan2(Y - 0.5, X - 0.5)
    warped = d * (1.25 + 0.75 * np.sin(3 * theta))  # |grad| between 0.5 and 2 near the contour
    out = reinitialize(ScalarField(g, warped))
    gn = godunov_gradient_norm(out).values
    band = (np.abs(out.values) < 20 * g.dx - g.dx) & (r > 2 * g.dx)
    assert gn[band].min() >= 0.95 and gn[band].max() <= 1.05


def test_reinitialize_keeps_contour_within_half_cell():
    g = box()
    X, Y = g.coords()
    warped = (0.3 - np.hypot(X - 0.45, Y - 0.55)) * (1.0 + 0.5 * X)
    before = ScalarField(g, warped)
    after = reinitialize(before)
    pts = extract_contour(after).points()
    dist = distance_to_segments(pts[:, 0], pts[:, 1], contour_segments(before))
    assert dist.max() <= g.dx / 2


def test_reinitialize_idempotent():
    g = box()
    X, Y = g.coords()
    once = reinitialize(ScalarField(g, (0.25 - np.hypot(X - 0.5, Y - 0.5)) * 1.7))
    twice = reinitialize(once)
    band = np.abs(once.values) < 20 * g.dx
    assert np.abs(twice.values - once.values)[band].max() <= 10 * g.dx ** 2


def test_reinitialize_reach_extends_past_band():
    g = box()
    X, Y = g.coords()
    v = 0.25 - np.hypot(X - 0.5, Y - 0.5)
    band, reach = 10 * g.dx, 20 * g.dx
    clamped = reinitialize_array(v, g, band)
    wide = reinitialize_array(v, g, band, reach=reach)
    inner = np.abs(clamped) < band
    np.testing.assert_array_equal(wide[inner], clamped[inner])
    outer = (np.abs(v) > band) & (np.abs(v) < reach - g.dx)
    assert np.abs(wide - v)[outer].max() < g.dx
    assert np.abs(wide).max() == pytest.approx(reach)


def test_reinitialize_uniform_sign_errors():
    g = box(0.1)
    with pytest.raises(NoInterfaceError):
        reinitialize(ScalarField(g, np.ones(g.shape)))


def _curvature_on_contour(psi):
    k = curvature(psi).values
    pts = extract_contour(psi).points()
    return bilinear(k, psi.grid, pts[:, 0], pts[:, 1])


def test_curvature_of_circle_sign_and_value():
    g = box(0.005)
    psi = reinitialize(init_signed_distance(circle_geometry(0.5, 0.5, 0.2), g))
    k = _curvature_on_contour(psi)
    # positive inside, so a convex grain has positive curvature 1/r
    assert np.abs(k - 5.0).max() <= 0.05 * 5.0


def test_curvature_flat_interface():
    g = box(0.01)
    X, Y = g.coords()
    psi = reinitialize(ScalarField(g, 0.5 - Y))
    assert np.abs(_curvature_on_contour(psi)).max() <= g.dx


def test_curvature_offset_levels():
    g = box(0.005)
    r = 0.2
    psi = init_signed_distance(circle_geometry(0.5, 0.5, r), g)
    k = curvature(psi).values
    X, Y = g.coords()
    for s in (-0.09, -0.05, 0.05, 0.09):
        # sample along a ring at signed distance s (inside for s > 0)
        th = np.linspace(0, 2 * np.pi, 200, endpoint=False)
        x = 0.5 + (r - s) * np.cos(th)
        y = 0.5 + (r - s) * np.sin(th)
        val = bilinear(k, g, x, y)
        assert np.allclose(val, 1 / (r - s), rtol=0.10)


def test_curvature_scales_as_inverse_radius():
    g = box(0.005)
    for r in (0.1, 0.2, 0.3):
        psi = reinitialize(init_signed_distance(circle_geometry(0.5, 0.5, r), g))
        assert np.median(_curvature_on_contour(psi)) * r == pytest.approx(1.0, rel=0.10)


def test_heaviside_examples():
    g = Grid2(5, 3, 0.1, 0.1)
    eps = 0.1
    vals = np.array([-2 * eps, -eps, 0.0, eps / 2, 2 * eps])
    H = heaviside_smoothed(ScalarField(g, np.tile(vals[:, None], (1, 3))), eps).values[:, 0]
    assert H[0] == 0.0 and H[-1] == 1.0 and H[2] == 0.5
    assert H[1] == pytest.approx(0.0, abs=1e-15)
    assert H[3] == pytest.approx(0.75 + 1 / (2 * math.pi), abs=1e-14)
    assert H[3] == pytest.approx(0.9092, abs=1e-4)
    with pytest.raises(ValueError):
        heaviside_smoothed(ScalarField(g, np.zeros((5, 3))), 0.0)


@given(st.floats(-1.0, 1.0), st.floats(1e-3, 0.5))
def test_heaviside_symmetry_and_monotonicity(x, eps):
    g = Grid2(3, 3, 0.1, 0.1)
    f = ScalarField(g, np.full((3, 3), x))
    a = heaviside_smoothed(f, eps).values[0, 0]
    b = heaviside_smoothed(-f, eps).values[0, 0]
    assert a + b == pytest.approx(1.0, abs=1e-14)
    c = heaviside_smoothed(ScalarField(g, np.full((3, 3), x + 1e-3)), eps).values[0, 0]
    assert c >= a - 1e-15


def test_phase_validation():
    g = box(0.1)
    psi = g.zeros()
    assert Phase(0, psi, 1.0).frozen.shape == g.shape
    for lam in (0.0, 1.5, -0.2):
        with pytest.raises(ValueError):
            Phase(0, psi, lam)
