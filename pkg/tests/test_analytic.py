from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lsjunction import analytic as an
from lsjunction.acceptance import young_root_search


def test_garcke_angle_examples():
    assert an.garcke_angle(1.0) == pytest.approx(2 * math.pi / 3, abs=1e-14)
    assert an.garcke_angle(3.0) == pytest.approx(2 * math.acos(1 / 6), abs=1e-14)
    assert an.garcke_angle(3.0) == pytest.approx(2.80670, abs=5e-6)
    assert an.garcke_angle(0.5 + 1e-12) < 1e-5


@pytest.mark.parametrize("r", [0.5, 0.4, 0.0, -1.0, float("nan")])
def test_garcke_angle_wetting(r):
    with pytest.raises(an.WettingLimitError):
        an.garcke_angle(r)


def test_garcke_velocity_examples():
    assert an.garcke_velocity(math.pi) == 0.0
    assert an.garcke_velocity(2 * math.pi / 3) == pytest.approx(1.04720, abs=5e-6)
    assert an.garcke_velocity(1e-12) == pytest.approx(math.pi, abs=1e-10)
    # dimensional variant scales with mobility * energy / width
    assert an.garcke_velocity(2 * math.pi / 3, mobility=2.0, gamma_top=3.0, width=0.5) == pytest.approx(
        12 * math.pi / 3)
    with pytest.raises(ValueError):
        an.garcke_velocity(0.0)


def test_garcke_profile_examples():
    v = math.pi / 3
    assert an.garcke_profile(0.5, 0.7, v) == pytest.approx(v * 0.7, abs=1e-14)
    assert an.garcke_profile(-0.5, 0.7, v) == pytest.approx(v * 0.7, abs=1e-14)
    assert an.garcke_profile(0.0, 0.0, v) == pytest.approx(-0.13735, abs=1e-5)
    assert an.garcke_profile(0.0, 0.0, v) == pytest.approx(3 / math.pi * math.log(math.cos(math.pi / 6)), abs=1e-14)
    x = np.linspace(-0.5, 0.5, 11)
    assert np.allclose(an.garcke_profile(x, 1.0, 0.0), 0.0)
    assert np.allclose(an.garcke_profile(x, 1.0, 1e-9), 0.0, atol=1e-9)


def test_garcke_profile_series_branch_is_continuous():
    x = np.linspace(-0.5, 0.5, 21)
    v = 1.01e-6  # just above the switch: exact branch vs the series at the same speed
    series = -v * (0.5 - np.abs(x)) ** 2 / 2
    assert np.allclose(an.garcke_profile(x, 0.0, v), series, rtol=1e-6, atol=1e-18)
    below = an.garcke_profile(x, 0.0, 0.99e-6)
    assert np.allclose(below, -0.99e-6 * (0.5 - np.abs(x)) ** 2 / 2, rtol=1e-12)


def test_garcke_profile_domain_errors():
    with pytest.raises(ValueError):
        an.garcke_profile(0.0, 0.0, math.pi)
    with pytest.raises(ValueError):
        an.garcke_profile(0.6, 0.0, 1.0)
    with pytest.raises(ValueError):
        an.garcke_profile(0.0, 0.0, -0.1)


@given(st.floats(0.05, 3.0), st.floats(0.0, 0.5))
def test_garcke_profile_even_and_monotone(v, x):
    assert an.garcke_profile(x, 0.3, v) == pytest.approx(an.garcke_profile(-x, 0.3, v), abs=1e-13)
    # height rises from the junction dip towards the walls
    xs = np.linspace(0, 0.5, 50)
    ys = an.garcke_profile(xs, 0.0, v)
    assert np.all(np.diff(ys) >= -1e-13)


@pytest.mark.parametrize("rg, rl", [(1.0, 1.0), (3.0, 0.2), (0.6, 5.0), (1.5, 0.5), (0.75, 2.0)])
def test_lambda_gamma_ratio_pairs(rg, rl):
    assert an.lambda_ratio_from_gamma_ratio(rg) == pytest.approx(rl, rel=1e-12)
    assert an.gamma_ratio_from_lambda_ratio(rl) == pytest.approx(rg, rel=1e-12)


def test_ratio_extremes():
    assert an.gamma_ratio_from_lambda_ratio(1e3) == pytest.approx(0.5005, rel=1e-12)
    assert an.gamma_ratio_from_lambda_ratio(1e-3) == pytest.approx(500.5, rel=1e-12)
    with pytest.raises(an.WettingLimitError):
        an.lambda_ratio_from_gamma_ratio(0.5)


@given(st.floats(0.5 + 1e-6, 1e3))
def test_ratio_maps_compose_to_identity(rg):
    back = an.gamma_ratio_from_lambda_ratio(an.lambda_ratio_from_gamma_ratio(rg))
    assert back == pytest.approx(rg, rel=1e-12)


@pytest.mark.parametrize("rl", [1e-3, 1e-2, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1e3])
def test_pipeline_lands_on_the_line(rl):
    s = an.GarckeSolution.from_lambda_ratio(rl)
    assert an.deviation_from_line(s.xi0, s.v_tj) < 1e-14


def test_deviation_examples():
    assert an.deviation_from_line(2 * math.pi / 3, math.pi / 3) == pytest.approx(0.0, abs=1e-15)
    assert an.deviation_from_line(2 * math.pi / 3, math.pi / 3 + 0.1) == pytest.approx(0.1 / math.sqrt(2), abs=1e-14)
    assert an.deviation_from_line(2 * math.pi / 3, math.pi / 3 + 0.1) == pytest.approx(0.0707, abs=5e-5)
    assert an.deviation_from_line(math.pi, 0.0) == 0.0


def test_young_symmetric():
    xi = an.young_angles(1.0, 1.0, 1.0)
    assert np.allclose(xi, [2 * math.pi / 3] * 3, atol=1e-14)


@pytest.mark.parametrize("rg", [0.51, 0.6, 0.75, 1.0, 1.5, 3.0, 50.0])
def test_young_matches_garcke_in_symmetric_case(rg):
    xi0, xi1, xi2 = an.young_angles(rg, rg, 1.0)
    assert xi0 == pytest.approx(an.garcke_angle(rg), abs=1e-12)
    assert xi1 == pytest.approx(xi2, abs=1e-12)


def test_young_arbitrary_against_root_search():
    g01, g02, g12 = 1.2, 0.9, 1.0
    got = an.young_angles(g01, g02, g12)
    ref = young_root_search(g01, g02, g12)
    assert np.allclose(got, ref, atol=1e-8)


def test_young_random_triples_against_root_search():
    rng = np.random.default_rng(20240611)
    n = 0
    while n < 100:
        g = rng.uniform(0.3, 2.0, 3)
        if not (g[0] < g[1] + g[2] - 0.05 and g[1] < g[0] + g[2] - 0.05 and g[2] < g[0] + g[1] - 0.05):
            continue
        got = an.young_angles(*g)
        ref = young_root_search(*g)
        assert np.allclose(got, ref, atol=1e-8), (g, got, ref)
        n += 1


@given(st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(0.1, 10.0))
@settings(max_examples=200)
def test_young_sine_law_sum_and_scaling(a, b, c, s):
    if not (a < b + c and b < a + c and c < a + b) or min(b + c - a, a + c - b, a + b - c) < 1e-3:
        return
    xi0, xi1, xi2 = an.young_angles(a, b, c)
    assert xi0 + xi1 + xi2 == pytest.approx(2 * math.pi, abs=1e-12)
    assert math.sin(xi0) / c == pytest.approx(math.sin(xi1) / b, abs=1e-12)
    assert math.sin(xi0) / c == pytest.approx(math.sin(xi2) / a, abs=1e-12)
    assert np.allclose(an.young_angles(s * a, s * b, s * c), (xi0, xi1, xi2), atol=1e-12)


@pytest.mark.parametrize("g", [(1.0, 1.0, 2.0), (3.0, 1.0, 1.0), (1.0, 0.2, 0.7), (0.0, 1.0, 1.0)])
def test_young_wetting_violation(g):
    with pytest.raises((an.WettingLimitError, ValueError)):
        an.young_angles(*g)


def test_gamma_from_angles_inverts_young():
    t = an.young_triple(1.2, 0.9, 1.0)
    g02, g01 = an.gamma_from_angles(t.xi1, t.xi2)
    assert g02 == pytest.approx(0.9, abs=1e-12)
    assert g01 == pytest.approx(1.2, abs=1e-12)
    with pytest.raises(ValueError):
        an.gamma_from_angles(math.pi, math.pi)
