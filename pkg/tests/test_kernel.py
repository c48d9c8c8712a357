import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from essdyn import (INF, AtInfinity, Finite, OverflowedToInfinity, UndefinedSingular, UnknownMap,
                    as_point, chordal_distance, compose_maps, derivative, evaluate, get_map,
                    iterate_map, map_labels)
from essdyn.kernel import MapSpec, chart_derivative, evaluate_batch
from essdyn.rules import FiniteList, Window
from essdyn.singlab import singularities_in_window
from essdyn.sphere import chordal_array

from oracles import CMATH_MAPS, PI, chordal_oracle, derivative_fd, safe_points, seeded

REAL_MAPS = ("g", "f", "h", "fatou")


# evaluation ------------------------------------------------------------------
def test_g_at_half_pi():
    r = evaluate(get_map("g"), PI / 2)
    assert isinstance(r, Finite)
    assert r.value == pytest.approx(math.e + PI / 2, abs=1e-12)
    assert abs(r.value - 4.2890782) < 1e-7


def test_h_pole_at_zero():
    assert evaluate(get_map("h"), 0) == AtInfinity()


def test_g_undefined_on_lattice():
    r = evaluate(get_map("g"), PI)
    assert isinstance(r, UndefinedSingular)
    assert r.singularity == pytest.approx(PI)
    r = evaluate(get_map("g"), -3 * PI)
    assert r.singularity == pytest.approx(-3 * PI)


def test_evaluate_at_infinity():
    assert isinstance(evaluate(get_map("g"), INF), UndefinedSingular)
    assert evaluate(get_map("zsq_over_zm1"), INF) == AtInfinity()
    # exp(alpha (z - 1/z)) has infinity in B
    assert isinstance(evaluate(get_map("exp_alpha"), INF), UndefinedSingular)


def test_overflow_is_reported_not_nan():
    for z in (800.0, 1e5, 700 + 1e-3j):
        r = evaluate(get_map("exp"), z)
        assert isinstance(r, OverflowedToInfinity)
    r = evaluate(get_map("g"), 1e-3)  # exp(1/sin z) with 1/sin z ~ 1000
    assert isinstance(r, OverflowedToInfinity)


@pytest.mark.parametrize("label", map_labels())
def test_values_match_cmath(label):
    rng = seeded(hash(label) % 1000)
    pts = safe_points(label, 200, rng)
    fmap = get_map(label)
    v, status = evaluate_batch(fmap, np.array(pts))
    ref = np.array([CMATH_MAPS[label](z) for z in pts])
    assert (status == 0).all()
    assert np.all(np.abs(v - ref) <= 1e-12 * np.maximum(1.0, np.abs(ref)))


@given(st.floats(-50, 50), st.floats(-50, 50), st.sampled_from(map_labels()))
def test_never_nan(x, y, label):
    r = evaluate(get_map(label), complex(x, y))
    if isinstance(r, Finite):
        assert math.isfinite(r.value.real) and math.isfinite(r.value.imag)


def test_batch_never_nan_on_wild_inputs():
    rng = np.random.default_rng(4)
    z = (rng.standard_normal(5000) + 1j * rng.standard_normal(5000)) * 10.0 ** rng.uniform(-8, 4, 5000)
    for label in map_labels():
        v, _ = evaluate_batch(get_map(label), z)
        assert not np.isnan(v).any(), label


# derivatives -----------------------------------------------------------------
def test_lambda_z_exp_derivative_at_zero():
    d = derivative(get_map("lambda_z_exp"), 0)
    assert d.value == pytest.approx(0.5, abs=1e-15)


def test_fatou_derivative_at_i_pi():
    # e^{-z} = -1 at z = i pi, so f'(z) = 1 - e^{-z} = 2
    d = derivative(get_map("fatou"), 1j * PI)
    assert abs(d.value - 2) < 1e-12


@pytest.mark.parametrize("label", map_labels())
def test_derivative_matches_finite_differences(label):
    rng = seeded(7 + len(label))
    pts = safe_points(label, 100, rng)
    fmap, f = get_map(label), CMATH_MAPS[label]
    for z in pts:
        d = derivative(fmap, z).value
        fd = derivative_fd(f, z)
        assert abs(d - fd) <= 1e-6 * abs(d), (z, d, fd)


def test_chart_derivative_at_infinity():
    # z^2/(z-1) near infinity: 1/f(1/w) = w (1 - w), derivative 1 at w = 0
    assert chart_derivative(get_map("zsq_over_zm1"), INF) == pytest.approx(1.0)
    # at the pole of h, (1/h)'(0) = 1
    assert chart_derivative(get_map("h"), 0j) == pytest.approx(1.0)


# conjugation symmetry -----------------------------------------------------------
@given(st.sampled_from(REAL_MAPS), st.floats(-3, 3), st.floats(0.3, 3))
def test_conjugation_symmetry(label, x, y):
    fmap = get_map(label)
    z = complex(x, y)
    a, b = evaluate(fmap, z), evaluate(fmap, z.conjugate())
    assert type(a) is type(b)
    if isinstance(a, Finite):
        assert abs(a.value.conjugate() - b.value) <= 1e-12 * max(1.0, abs(a.value))


# chordal metric --------------------------------------------------------------------
def test_chordal_examples():
    assert chordal_distance(0j, INF) == 2.0
    assert chordal_distance(1 + 2j, 1 + 2j) == 0.0
    assert chordal_distance(1, INF) == pytest.approx(math.sqrt(2))
    assert chordal_distance(INF, INF) == 0.0


sphere_points = st.one_of(
    st.just(INF),
    st.builds(complex, st.floats(-1e6, 1e6), st.floats(-1e6, 1e6)),
    st.builds(complex, st.floats(-3, 3), st.floats(-3, 3)),
)


def _o(p):
    return None if p is INF else p


@given(sphere_points, sphere_points)
def test_chordal_matches_stereographic_oracle(p, q):
    assert chordal_distance(p, q) == pytest.approx(chordal_oracle(_o(p), _o(q)), abs=1e-12)


@given(sphere_points, sphere_points, sphere_points)
def test_chordal_metric_axioms(p, q, r):
    d = chordal_distance
    assert 0.0 <= d(p, q) <= 2.0
    assert d(p, q) == d(q, p)
    assert d(p, p) == 0.0
    assert d(p, r) <= d(p, q) + d(q, r) + 1e-12


def test_chordal_array_matches_scalar():
    rng = np.random.default_rng(0)
    z = rng.standard_normal(400) + 1j * rng.standard_normal(400)
    w = rng.standard_normal(400) * 10 + 1j * rng.standard_normal(400)
    zi = rng.random(400) < 0.2
    wi = rng.random(400) < 0.2
    got = chordal_array(z, zi, w, wi)
    for k in range(400):
        p = INF if zi[k] else complex(z[k])
        q = INF if wi[k] else complex(w[k])
        assert got[k] == pytest.approx(chordal_distance(p, q), abs=1e-14)


def test_as_point_forms():
    assert as_point("inf") is INF
    assert as_point([1.0, -2.0]) == 1 - 2j
    assert as_point(complex(math.inf, 0)) is INF
    with pytest.raises(ValueError):
        as_point(complex(math.nan, 0))


# catalog ----------------------------------------------------------------------
def test_catalog_lookups():
    g = get_map("g")
    assert g.class_tag == "Kinf"
    pts = singularities_in_window(g, Window(-4, 4, -1, 1))
    assert pts == pytest.approx([-PI, 0, PI])
    fatou = get_map("fatou")
    assert fatou.class_tag == "E"
    assert singularities_in_window(fatou, Window(-9, 9, -9, 9), sphere=True) == [INF]
    assert get_map("h").class_tag == "M"


def test_unknown_label():
    with pytest.raises(UnknownMap):
        get_map("nope")


def test_inconsistent_tag_rejected():
    from essdyn import expr as ex
    with pytest.raises(ValueError):
        MapSpec("bad", ex.free_z(), FiniteList((0j, 1 + 0j)), "K1")


def test_f_is_g_plus_two_pi():
    rng = seeded(3)
    pts = np.array(safe_points("g", 300, rng))
    g, _ = evaluate_batch(get_map("g"), pts)
    f, _ = evaluate_batch(get_map("f"), pts)
    assert np.all(np.abs(f - (g + 2 * PI)) <= 1e-12 * np.maximum(1, np.abs(g)))


# composition ------------------------------------------------------------------
def test_compose_exp_with_rational():
    c = compose_maps(get_map("exp"), get_map("zsq_over_zm1"))
    assert singularities_in_window(c, Window(-4, 4, -4, 4), sphere=True) == [1 + 0j, INF]
    assert c.class_tag == "K2"


def test_compose_with_identity_keeps_b():
    m = get_map("exp_inv_tan")
    c = compose_maps(get_map("identity"), m)
    w = Window(-3, 3, -3, 3)
    assert singularities_in_window(c, w, sphere=True) == singularities_in_window(m, w, sphere=True)


def test_exp_over_z_squared():
    f2 = iterate_map(get_map("exp_over_z"), 2)
    got = singularities_in_window(f2, Window(-4, 4, -4, 4), sphere=True)
    assert INF in got and any(p is not INF and abs(p) < 1e-9 for p in got)


def _closed_form_b(case, window):
    """Singularity sets of compositions worked out by hand."""
    if case == ("exp_alpha", "zsq_over_zm1"):
        # z^2/(z-1) takes the value 0 only at 0 and the value inf only at 1 and inf
        pts = [0j, 1 + 0j]
    elif case == ("exp_alpha", "sin_lambda"):
        pts = [PI * k for k in range(-20, 21)]  # sin z = 0; sin never takes inf
    elif case == ("exp_alpha", "exp"):
        pts = []  # exp omits both 0 and inf
    elif case == ("exp", "exp_over_z"):
        pts = [0j]  # pole of the inner map
    else:
        raise KeyError(case)
    return sorted((complex(p) for p in pts if window.contains(complex(p))),
                  key=lambda p: (p.real, p.imag))


@given(st.sampled_from([("exp_alpha", "zsq_over_zm1"), ("exp_alpha", "sin_lambda"),
                        ("exp_alpha", "exp"), ("exp", "exp_over_z")]),
       st.floats(-6, -0.5), st.floats(0.5, 6), st.floats(-2, -0.3), st.floats(0.3, 2))
def test_composition_singularity_law(case, a, b, c, d):
    w = Window(a, b, c, d)
    comp = compose_maps(get_map(case[0]), get_map(case[1]))
    got = [p for p in singularities_in_window(comp, w) if p is not INF]
    want = _closed_form_b(case, w)
    assert len(got) == len(want), (got, want)
    assert all(abs(p - q) <= 1e-9 for p, q in zip(got, want))
