from __future__ import annotations

import math

import numpy as np
import pytest

from lsjunction.contour import extract_contour, polygon_area
from lsjunction.evolution import (Formulation, Microstructure, SolverConfig, SolverError, advance, correct_merriman,
                                  default_dt, partition_defect, source_heterogeneous, source_zhao,
                                  step_diffusion_implicit)
from lsjunction.grid import BC, Grid2, ScalarField, laplacian_array
from lsjunction.levelset import Phase, circle_geometry, init_signed_distance, reinitialize, reinitialize_array
from lsjunction.measure import locate_tj, vacuum_overlap_report
from lsjunction.scenarios import GarckeScenario, build_garcke


def half_planes(g, y0=0.5, gap=0.0):
    X, Y = g.coords()
    top = Phase(0, ScalarField(g, Y - y0 - gap / 2))
    bot = Phase(1, ScalarField(g, y0 - gap / 2 - Y))
    return [top, bot]


def test_default_dt_scaling():
    assert default_dt(1e-3) == pytest.approx(1e-5)
    assert default_dt(5e-4) == pytest.approx(1e-5)
    assert default_dt(5e-3) == pytest.approx(2.5e-4)


def test_constant_field_is_steady():
    g = Grid2.from_extent(0, 1, 0, 1, 0.05)
    psi = ScalarField(g, np.full(g.shape, 0.37))
    out = step_diffusion_implicit(psi, 1e-2, 1.0)
    assert np.allclose(out.values, 0.37, atol=1e-13)


@pytest.mark.parametrize("pinned", [False, True])
def test_backward_euler_consistency(pinned):
    # one implicit step minus the explicit Euler update is O(dt^2)
    bc = (BC.PINNED, BC.ZERO_FLUX, BC.ZERO_FLUX, BC.ZERO_FLUX) if pinned else (BC.ZERO_FLUX,) * 4
    g = Grid2.from_extent(0, 1, 0, 1, 0.05, bc=bc)
    X, Y = g.coords()
    psi = ScalarField(g, np.sin(2 * X) * np.cos(3 * Y))
    rhs = ScalarField(g, X * Y)
    errs = []
    for dt in (2e-5, 1e-5, 5e-6):
        one = step_diffusion_implicit(psi, dt, 0.7, rhs).values
        expl = psi.values + dt * (0.7 * laplacian_array(psi.values, g) + rhs.values)
        if pinned:
            expl[g.pinned_mask()] = psi.values[g.pinned_mask()]
        errs.append(np.abs(one - expl).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_frozen_nodes_hold_their_values():
    g = Grid2.from_extent(0, 1, 0, 1, 0.05)
    X, Y = g.coords()
    psi = ScalarField(g, np.sin(5 * X) + Y)
    frozen = (X < 0.2) & (Y > 0.6)
    out = step_diffusion_implicit(psi, 1e-2, 1.0, frozen=frozen)
    assert np.array_equal(out.values[frozen], psi.values[frozen])
    assert not np.allclose(out.values[~frozen], psi.values[~frozen])


def test_invalid_dt():
    g = Grid2.from_extent(0, 1, 0, 1, 0.1)
    with pytest.raises(ValueError):
        step_diffusion_implicit(g.zeros(), 0.0, 1.0)
    with pytest.raises(ValueError):
        SolverConfig(dt=-1.0).resolved(g)


def _circle_radius(psi):
    return math.sqrt(abs(polygon_area(extract_contour(psi).polylines[0])) / math.pi)


def test_shrinking_circle_first_order_in_time():
    # radius error at a fixed time shrinks in proportion to dt (backward Euler)
    g = Grid2.from_extent(0, 1, 0, 1, 0.01)
    t_end, errs = 0.02, []
    for dt in (1e-3, 5e-4, 2.5e-4):
        psi = init_signed_distance(circle_geometry(0.5, 0.5, 0.3), g)
        for _ in range(int(round(t_end / dt))):
            psi = reinitialize(step_diffusion_implicit(psi, dt, 1.0))
        errs.append(_circle_radius(psi) - math.sqrt(0.09 - 2 * t_end))
    assert abs(errs[-1]) < 0.01 * math.sqrt(0.09 - 2 * t_end)
    assert abs(errs[0]) > abs(errs[1]) > abs(errs[2])
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.35)


def test_band_clamp_does_not_slow_the_step():
    # the diffusion length sqrt(dt) is ~3h; a clamp at 20h still raises psi at the
    # contour by ~0.5% of the motion per step, the extension to 40h removes it
    # (what is left against the exact motion is the backward-Euler error)
    g = Grid2.from_extent(0, 1, 0, 1, 0.005)
    h, dt = g.dx, default_dt(g.dx)
    psi = init_signed_distance(circle_geometry(0.5, 0.5, 0.3), g)
    moves = {}
    for reach in (None, 40 * h, 64 * h):
        p = psi.with_values(reinitialize_array(psi.values, g, 20 * h, reach=reach))
        r0 = _circle_radius(p)
        moves[reach] = (_circle_radius(step_diffusion_implicit(p, dt, 1.0)) - r0) / (math.sqrt(r0 ** 2 - 2 * dt) - r0)
    assert moves[40 * h] == pytest.approx(moves[64 * h], abs=1e-4)
    assert moves[None] < moves[40 * h] - 2e-3


def test_shrinking_circle_early_times():
    g = Grid2.from_extent(0, 1, 0, 1, 0.005)
    dt = default_dt(g.dx)
    psi = init_signed_distance(circle_geometry(0.5, 0.5, 0.3), g)
    t = 0.0
    while t < 0.015:
        psi = reinitialize(step_diffusion_implicit(psi, dt, 1.0))
        t += dt
        exact = math.sqrt(0.09 - 2 * t)
        assert _circle_radius(psi) == pytest.approx(exact, rel=0.01)


def test_heterogeneous_source_examples():
    g = Grid2(3, 3, 0.1, 0.1)
    eps = 0.05
    vac = [Phase(k, ScalarField(g, np.full((3, 3), -0.2)), lam) for k, lam in enumerate((1.0, 0.5, 0.25))]
    s = source_heterogeneous(vac, eps, 600.0)
    assert np.allclose(s[0].values, 600.0) and np.allclose(s[1].values, 300.0) and np.allclose(s[2].values, 150.0)
    over = [Phase(0, ScalarField(g, np.full((3, 3), 0.2)), 0.5), Phase(1, ScalarField(g, np.full((3, 3), 0.2)), 1.0)]
    s = source_heterogeneous(over, eps, 600.0)
    assert np.allclose(s[0].values, -300.0) and np.allclose(s[1].values, -600.0)
    # exact partition: one phase well inside, the other well outside
    part = [Phase(0, ScalarField(g, np.full((3, 3), 0.2))), Phase(1, ScalarField(g, np.full((3, 3), -0.2)))]
    assert all(np.all(f.values == 0.0) for f in source_heterogeneous(part, eps))


def test_zhao_source_examples():
    g = Grid2(3, 3, 0.1, 0.1)
    vac = [Phase(k, ScalarField(g, np.full((3, 3), -0.2)), lam) for k, lam in enumerate((1.0, 0.3))]
    s = source_zhao(vac, 0.05, 600.0)
    assert all(np.allclose(f.values, 600.0) for f in s)
    X, Y = Grid2.from_extent(0, 1, 0, 1, 0.1).coords()
    g2 = Grid2.from_extent(0, 1, 0, 1, 0.1)
    ph = [Phase(0, ScalarField(g2, np.sin(3 * X) * Y)), Phase(1, ScalarField(g2, -0.7 * X + 0.2))]
    for a, b in zip(source_zhao(ph, 0.2, 600.0), source_heterogeneous(ph, 0.2, 600.0)):
        assert np.array_equal(a.values, b.values)
    with pytest.raises(ValueError):
        source_zhao(ph, 0.2, 0.0)


def test_merriman_examples():
    g = Grid2(3, 3, 0.1, 0.1)

    def const(v):
        return ScalarField(g, np.full((3, 3), v))

    a, b = correct_merriman([Phase(0, const(0.3)), Phase(1, const(0.1))])
    assert np.allclose(a.psi.values, 0.1) and np.allclose(b.psi.values, -0.1)
    out = correct_merriman([Phase(0, const(-0.2)), Phase(1, const(-0.4)), Phase(2, const(-0.6))])
    assert np.allclose(out[0].psi.values, 0.1)
    assert np.allclose(out[1].psi.values, -0.1)
    assert np.allclose(out[2].psi.values, -0.2)
    # already consistent pair is a fixed point
    X, Y = Grid2.from_extent(0, 1, 0, 1, 0.1).coords()
    g2 = Grid2.from_extent(0, 1, 0, 1, 0.1)
    p = ScalarField(g2, np.cos(4 * X) - Y)
    a, b = correct_merriman([Phase(0, p), Phase(1, -p)])
    assert np.array_equal(a.psi.values, p.values) and np.array_equal(b.psi.values, -p.values)
    with pytest.raises(ValueError):
        correct_merriman([Phase(0, p)])


def test_merriman_pairwise_antisymmetry():
    g = Grid2.from_extent(0, 1, 0, 1, 0.05)
    rng = np.random.default_rng(3)
    a, b = correct_merriman([Phase(0, ScalarField(g, rng.normal(size=g.shape))),
                             Phase(1, ScalarField(g, rng.normal(size=g.shape)))])
    assert np.all(a.psi.values + b.psi.values == 0.0)


@pytest.mark.parametrize("form", ["hetero", "zhao", "merriman"])
def test_flat_interface_is_stationary(form):
    # the 20h band must clamp inside the domain, otherwise the distance field fights the zero-flux walls
    g = Grid2.from_extent(0, 0.2, 0, 1, 0.01)
    ms = Microstructure(half_planes(g, 0.5 + 0.3 * g.dx), formulation=form)
    *_, last = advance(ms, SolverConfig(t_end=1e9, max_steps=10_000, snapshot_every=10_000))
    assert last.step == 10_000
    y = extract_contour(last.phases[0].psi).points()[:, 1]
    assert np.abs(y - (0.5 + 0.3 * g.dx)).max() <= g.dx


def test_vacuum_strip_is_filled():
    g = Grid2.from_extent(0, 1, 0, 1, 0.01)
    ms = Microstructure(half_planes(g, 0.5, gap=4 * g.dx), formulation="hetero")
    eps = 2 * g.dx
    before = vacuum_overlap_report(ms.phases, eps)
    assert before[0] == pytest.approx(1.0)
    *_, last = advance(ms, SolverConfig(t_end=1e9, max_steps=1000, snapshot_every=1000))
    vac, ovl, _ = vacuum_overlap_report(last.phases, eps)
    assert max(vac, ovl) < 0.05


def test_zhao_equals_hetero_with_unit_lambdas():
    scn = GarckeScenario(1.0, 1.0, h=0.02)
    cfg = SolverConfig(t_end=1e9, max_steps=30, snapshot_every=1, zhao_lambda=600.0)
    a = build_garcke(scn)
    b = build_garcke(scn)
    b.formulation = Formulation.ZHAO
    for sa, sb in zip(advance(a, cfg), advance(b, cfg)):
        assert np.array_equal(sa.stacked(), sb.stacked())


def test_symmetric_garcke_stays_on_axis():
    scn = GarckeScenario(0.5, 0.5, h=0.01)
    ms = build_garcke(scn)
    h = scn.h
    cfg = SolverConfig(t_end=0.3, snapshot_every=20)
    tj = None
    for snap in advance(ms, cfg):
        tj = locate_tj(snap.phases, near=tj, search_radius=None if tj is None else 10 * h)
        assert abs(tj[0]) <= h
    assert tj[1] < scn.y0 - 0.1


def test_advance_reports_partition_defect():
    g = Grid2.from_extent(0, 1, 0, 1, 0.05)
    ms = Microstructure(half_planes(g, 0.5, gap=0.2))
    first = next(advance(ms, SolverConfig(t_end=1e9, max_steps=1)))
    assert first.step == 0
    assert first.max_defect == pytest.approx(np.abs(partition_defect(ms.stacked(), 0.1)).max())


def test_formulation_parse():
    assert Formulation.parse("MerrimanMCF") is Formulation.MERRIMAN
    assert Formulation.parse("ZhaoPenalized") is Formulation.ZHAO
    assert Formulation.parse("hetero") is Formulation.HETERO
    with pytest.raises(ValueError):
        Formulation.parse("level")


def test_microstructure_validation():
    g = Grid2.from_extent(0, 1, 0, 1, 0.1)
    with pytest.raises(ValueError):
        Microstructure([Phase(0, g.zeros())])
    with pytest.raises(ValueError):
        Microstructure(half_planes(g), lambda_max=0.0)


def test_solver_error_is_runtime_error():
    assert issubclass(SolverError, RuntimeError)
