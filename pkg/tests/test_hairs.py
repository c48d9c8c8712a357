import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from essdyn import INF, chordal_distance, evaluate, get_map
from essdyn.escape import EscapingOscillating, EscapingToPoint, build_cover, eventually_equal
from essdyn.hairs import (DegenerateCurve, EndpointNotSingular, RayToInfinity, RegionSpec, Segment,
                          _sample_v0, hair_preset, is_presingular, region_membership,
                          singular_orbit, trace_hair, verify_absorbing, verify_translation)
from essdyn.kernel import evaluate_batch

from oracles import PI, in_v0


def g_oracle(z):
    return cmath.exp(1 / cmath.sin(z)) + z


# regions ------------------------------------------------------------------------------
def test_region_examples():
    v0 = RegionSpec("V0")
    assert region_membership(v0, -0.1)
    assert not region_membership(v0, -0.2 + 0.05j)
    assert not region_membership(v0, 0)
    # the arithmetic behind the examples
    assert abs(-0.1 + PI / 8) < PI / 8
    assert abs(-0.1 - 2j / PI) >= 2 / PI
    assert 0.2 ** 2 + 0.05 ** 2 < 2 * (2 / PI) * 0.05


@given(st.floats(-0.8, 0.05), st.floats(-0.45, 0.45))
def test_v0_matches_inequalities(x, y):
    z = complex(x, y)
    m = RegionSpec("V0").margin(z)
    if abs(m) > 1e-12:
        assert region_membership(RegionSpec("V0"), z) == in_v0(z)


@given(st.floats(-0.8, 0.05), st.floats(-0.45, 0.45), st.integers(-3, 3))
def test_regions_translate(x, y, k):
    z = complex(x, y)
    if abs(RegionSpec("V0").margin(z)) > 1e-12:  # translation rounds points on the boundary
        assert region_membership(RegionSpec("V0", k), z + 2 * PI * k) == region_membership(RegionSpec("V0"), z)


def test_other_regions():
    assert region_membership(RegionSpec("T0"), -0.2 + 0.05j)
    assert region_membership(RegionSpec("disc"), 0.05j)
    assert region_membership(RegionSpec("Tinf", height=3), 4j)
    assert not region_membership(RegionSpec("Tinf", height=3), 2j)
    with pytest.raises(ValueError):
        RegionSpec("N0")


# absorbing-domain verifier --------------------------------------------------------------
def test_single_point_examples():
    w = g_oracle(-0.1)
    assert abs(w - (-0.0999554)) < 1e-7 and in_v0(w)
    assert RegionSpec("V0").margin(w) > 0
    z = -0.2 + 0.02j
    w = g_oracle(z)
    assert in_v0(w) and abs(w.imag) < abs(z.imag) and w.real > z.real
    v, _ = evaluate_batch(get_map("g"), np.array([z]))
    assert abs(v[0] - w) < 1e-15


def test_verifier_counts_match_oracle():
    n = 3000
    rep = verify_absorbing(samples=n, seed=3)
    z = _sample_v0(n, 3, 0)
    assert rep["samples"] == n and rep["seed"] == 3
    a = sum(not in_v0(g_oracle(p)) for p in z)
    b = sum(not (g_oracle(p).real > p.real and g_oracle(p).real < 0) for p in z)
    c = sum(abs(g_oracle(p).imag) > abs(p.imag) for p in z)
    assert rep["violations"] == {"A": a, "B": b, "C": c}


def test_verifier_report_is_deterministic():
    assert verify_absorbing(samples=2000, seed=5) == verify_absorbing(samples=2000, seed=5)


def test_samples_lie_in_v0_away_from_boundary():
    z = _sample_v0(5000, 0, 0)
    assert z.size == 5000
    assert all(in_v0(p) for p in z)
    assert RegionSpec("V0").margin(z).min() > 1e-6


def test_drift_and_contraction_hold():
    rep = verify_absorbing(samples=20000, seed=1)
    assert rep["violations"]["B"] == 0 and rep["violations"]["C"] == 0


def test_points_leaving_v0_come_back():
    rep = verify_absorbing(samples=20000, seed=1)
    assert rep["reentry"]["left"] == rep["violations"]["A"]
    assert rep["reentry"]["never_returned"] == 0


def test_translated_region_gives_same_counts():
    a = verify_absorbing(samples=5000, seed=2)
    b = verify_absorbing(samples=5000, seed=2, k=1)
    assert a["violations"] == b["violations"]


@given(st.floats(-3, 3), st.floats(0.2, 2), st.integers(-4, 4))
def test_g_translation_equivariance(x, y, k):
    g = get_map("g")
    z = complex(x, y)
    a, b = evaluate(g, z), evaluate(g, z + 2 * PI * k)
    assert abs((a.value + 2 * PI * k) - b.value) <= 1e-9 * max(1, abs(b.value))


def test_f_maps_v0_into_next_v():
    z = _sample_v0(4000, 7, 0)
    gz, _ = evaluate_batch(get_map("g"), z)
    fz, _ = evaluate_batch(get_map("f"), z)
    assert np.array_equal(RegionSpec("V0").contains(gz), RegionSpec("V0", 1).contains(fz))


def test_translation_examples():
    w = 10j
    dev = abs(g_oracle(w) - (w + 1))
    assert abs(dev - 9.08e-5) < 1e-7
    assert verify_translation(height=6)["max_deviation"] < 5e-3
    assert verify_translation(height=3)["max_deviation"] < 0.11
    with pytest.raises(ValueError):
        verify_translation(height=2)


def test_translation_bound_oracle():
    # |1/sin w| <= 1/sinh(Im w), so the deviation is at most e^{1/sinh h} - 1
    for h in (3, 6):
        rep = verify_translation(height=h, samples=2000)
        assert rep["max_deviation"] <= math.exp(1 / math.sinh(h)) - 1


# hairs -----------------------------------------------------------------------------------
def test_f_hair_escapes():
    fmap, curve, endpoint, cover = hair_preset("f-wandering")
    tr = trace_hair(fmap, curve, endpoint, cover)
    assert tr.all_escaping
    assert all(c == EscapingToPoint(INF) for c in tr.classes)
    assert tr.common_itinerary is not None
    for it in tr.itineraries:
        assert eventually_equal(tr.common_itinerary, it)


def test_h_ray_hair_period_two():
    fmap = get_map("h")
    tr = trace_hair(fmap, Segment(-20.0, -5.0), INF, build_cover([INF, 0]))
    assert all(isinstance(c, EscapingOscillating) and c.period == 2 for c in tr.classes)
    tail = tr.common_itinerary.tail()
    assert tail.period == 2 and set(tail.cycle) == {INF, 0j}
    for it in tr.itineraries:
        assert eventually_equal(tr.common_itinerary, it)


def test_degenerate_curve():
    with pytest.raises(DegenerateCurve):
        Segment(1.0, 1.0)
    with pytest.raises(DegenerateCurve):
        RayToInfinity(0j, 0)


def test_endpoint_must_be_presingular():
    with pytest.raises(EndpointNotSingular):
        trace_hair(get_map("h"), Segment(-1.0, -0.5), -0.7)
    assert is_presingular(get_map("h"), 0)
    assert is_presingular(get_map("g"), PI)
    assert not is_presingular(get_map("g"), -0.3)


def test_hair_csv():
    fmap, curve, endpoint, cover = hair_preset("g-baker")
    tr = trace_hair(fmap, curve, endpoint, cover, sample_count=8)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,re,im,class"
    assert len(lines) == 9
    t, re, im, cls = lines[1].split(",")
    assert cls == "EscapingToPoint" and float(im) == 0.0


# singular orbits ----------------------------------------------------------------------------------
def test_f_singular_orbit_wanders():
    fmap, curve, endpoint, cover = hair_preset("f-wandering")
    tr = trace_hair(fmap, curve, endpoint, cover)
    so = singular_orbit(fmap, tr, 5)
    assert len(so.points) == 6
    for k, p in enumerate(so.points):
        assert abs(p - 2 * PI * k) <= 1e-9
        assert abs(so.limits[k] - 2 * PI * k) <= 1e-4
    assert so.classification == "Wandering"
    assert "heuristic" in so.flags


def test_h_ray_singular_orbit_alternates():
    fmap, curve, endpoint, cover = hair_preset("h-ray")
    tr = trace_hair(fmap, curve, endpoint, cover)
    so = singular_orbit(fmap, tr, 4)
    assert so.points[0] is INF and so.points[2] is INF and so.points[4] is INF
    assert abs(so.points[1]) < 1e-12 and abs(so.points[3]) < 1e-12
    assert so.classification == "Periodic" and so.period == 2


def test_h_inf_preset_singular_orbit_constant():
    fmap, curve, endpoint, cover = hair_preset("h-inf")
    tr = trace_hair(fmap, curve, endpoint, cover)
    so = singular_orbit(fmap, tr, 3)
    assert so.points == [INF] * 4
    assert so.classification == "Periodic" and so.period == 1


def test_pullback_curve_is_on_the_preimage():
    from essdyn.hairs import PullbackCurve
    c = PullbackCurve()
    t = np.array([0.1, 0.05, 0.01])
    z = c.point(t)
    for zz, tt in zip(z, t):
        w = -cmath.exp(zz) + 1 / zz
        assert abs(w - (1 / tt + 1j * PI)) <= 1e-9 * abs(w)


def test_steps_must_be_positive():
    fmap, curve, endpoint, cover = hair_preset("g-baker")
    tr = trace_hair(fmap, curve, endpoint, cover, sample_count=8)
    with pytest.raises(ValueError):
        singular_orbit(fmap, tr, 0)
