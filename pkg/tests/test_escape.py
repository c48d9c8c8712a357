import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from essdyn import INF, get_map
from essdyn.escape import (OUTSIDE, EscapingOscillating, EscapingToPoint, EventualSeq,
                           ItinerarySeq, NeverEntersCover, NonEscaping, OverlappingCover,
                           SeparatingCover, Undecided, build_cover, classification_report,
                           classify_escape, classify_many, eventually_equal, extract_itinerary,
                           membership_report)

from oracles import PI, shift_orbits_meet

SYMBOLS = (0j, INF, 2 * PI + 0j)


# covers ------------------------------------------------------------------------------
def test_valid_lattice_cover():
    c = build_cover([0, 2 * PI], 0.15)
    assert c.symbol_of(0.1) == 0 and c.symbol_of(2 * PI - 0.1) == 1
    assert c.symbol_of(PI) == -1


def test_overlapping_cover_rejected():
    with pytest.raises(OverlappingCover):
        build_cover([0, 2 * PI], 4.0)


def test_cover_with_infinity():
    c = build_cover([INF, 0], 0.3)
    assert c.symbol_of(INF) == 0 and c.symbol_of(0.2) == 1
    # chordal ball of radius r about infinity is |z| > sqrt(4/r^2 - 1)
    R = math.sqrt(4 / 0.09 - 1)
    assert c.symbol_of(R * 1.001) == 0 and c.symbol_of(R * 0.999) == -1


def test_infinity_ball_overlapping_finite_ball():
    with pytest.raises(OverlappingCover):
        SeparatingCover((INF, 10 + 0j), (0.3, 5.0))


def test_halved_cover():
    c = build_cover([0, INF], 0.2).halved()
    assert c.radii == (0.1, 0.1)


@given(st.floats(0.01, 3.0))
def test_lattice_cover_valid_iff_balls_disjoint(r):
    if 2 * r < 2 * PI:
        build_cover([0, 2 * PI], r)
    else:
        with pytest.raises(OverlappingCover):
            build_cover([0, 2 * PI], r)


# itineraries -------------------------------------------------------------------------------
def test_h_baker_itinerary_alternates():
    it = extract_itinerary(get_map("h"), -15, build_cover([INF, 0]), 40)
    assert it.symbols[:6] == (INF, 0j, INF, 0j, INF, 0j)
    assert it.tail() == EventualSeq((), (INF, 0j))


def test_g_itinerary_constant():
    it = extract_itinerary(get_map("g"), -0.1, build_cover([0]), 40)
    assert set(it.symbols) == {0j}


def test_f_itinerary_walks_the_lattice():
    cover = build_cover([2 * PI * k for k in range(11)], 0.15)
    it = extract_itinerary(get_map("f"), -0.1, cover, 15)
    assert it.offset == 0
    assert [s / (2 * PI) for s in it.symbols[:11]] == pytest.approx(list(range(11)))
    assert all(s is OUTSIDE for s in it.symbols[11:])


def test_never_enters_cover():
    with pytest.raises(NeverEntersCover):
        extract_itinerary(get_map("lambda_z_exp"), 0.3, build_cover([INF]), 50)


# eventually_equal ----------------------------------------------------------------------------
def test_eventually_equal_examples():
    a = EventualSeq((), (0j, INF))
    b = EventualSeq((), (INF, 0j))
    assert eventually_equal(a, b)
    assert not eventually_equal(EventualSeq((), (0j,)), EventualSeq((), (2 * PI + 0j,)))
    assert eventually_equal(a, a)
    assert not eventually_equal(a, b).heuristic


def test_finite_records_are_heuristic():
    s = ItinerarySeq((0j, INF) * 20, 0)
    t = ItinerarySeq((INF, 0j) * 20, 3)
    v = eventually_equal(s, t)
    assert v and v.heuristic


def test_tail_walks_back_to_cycle_start():
    s = ItinerarySeq((2 * PI + 0j, 2 * PI + 0j, 0j, INF, 0j, INF, 0j, INF, 0j, INF), 0)
    # periodicity is detected on the last ``window`` symbols, then extended backwards
    assert s.tail(window=6) == EventualSeq((2 * PI + 0j, 2 * PI + 0j), (0j, INF))
    assert s.tail() is None  # the default window covers the whole transient


words = st.tuples(st.lists(st.sampled_from(SYMBOLS), max_size=4).map(tuple),
                  st.lists(st.sampled_from(SYMBOLS), min_size=1, max_size=4).map(tuple))


def _seq(w):
    return EventualSeq(*w)


@given(words, words)
def test_agrees_with_shift_oracle(s, t):
    assert bool(eventually_equal(_seq(s), _seq(t))) == shift_orbits_meet(s, t)


@given(words)
def test_reflexive(s):
    assert eventually_equal(_seq(s), _seq(s))


@given(words, words)
def test_symmetric(s, t):
    assert bool(eventually_equal(_seq(s), _seq(t))) == bool(eventually_equal(_seq(t), _seq(s)))


@given(words, words, words)
def test_transitive(s, t, u):
    a, b, c = _seq(s), _seq(t), _seq(u)
    if eventually_equal(a, b) and eventually_equal(b, c):
        assert eventually_equal(a, c)


@given(words, st.integers(0, 12))
def test_finite_record_of_word_matches_word(w, extra):
    # a long finite record of an eventually periodic word is equivalent to it
    n = len(w[0]) + 48 + extra
    rec = ItinerarySeq(tuple(_seq(w)[k] for k in range(n)), 0)
    assert eventually_equal(rec, _seq(w))


# classification --------------------------------------------------------------------------------
def test_g_escapes_to_zero():
    assert classify_escape(get_map("g"), -0.1, build_cover([0])) == EscapingToPoint(0j)


def test_h_oscillates_with_period_two():
    cls = classify_escape(get_map("h"), -15, build_cover([INF, 0]))
    assert isinstance(cls, EscapingOscillating)
    assert cls.period == 2 and set(cls.symbols) == {INF, 0j}
    assert eventually_equal(cls.eventual_tail, EventualSeq((), (0j, INF)))


def test_f_escapes_to_infinity():
    assert classify_escape(get_map("f"), -0.1, build_cover([INF])) == EscapingToPoint(INF)


def test_presingular_start_is_not_escaping():
    cls = classify_escape(get_map("h"), 0, build_cover([INF, 0]))
    assert isinstance(cls, NonEscaping)


def test_attracting_fixed_point_not_escaping():
    cls = classify_escape(get_map("lambda_z_exp"), 0.3, build_cover([INF]))
    assert isinstance(cls, NonEscaping)


def test_batch_matches_single():
    fmap, cover = get_map("h"), build_cover([INF, 0])
    pts = np.array([-15, -8, 0.5 + 0.5j, -0.3 + 2j, 2.0])
    res = classify_many(fmap, pts, cover, (200, 800, 3200))
    from essdyn.escape import decision_to_class
    for i, z in enumerate(pts):
        assert decision_to_class(cover, res.decision, i) == classify_escape(fmap, z, cover,
                                                                            (200, 800, 3200))


def test_bad_budgets():
    with pytest.raises(ValueError):
        classify_escape(get_map("g"), -0.1, build_cover([0]), budgets=(100, 50))


def test_report_json():
    rep = classification_report(get_map("h"), -15, build_cover([INF, 0]))
    text = json.dumps(rep)
    back = json.loads(text)
    assert back["class"]["class"] == "EscapingOscillating"
    assert back["itinerary"]["tail"]["cycle"] == ["inf", [0.0, 0.0]]
    assert {"point", "class", "itinerary", "omega", "budgets", "flags"} <= set(back)
    assert len(back["omega"]["clusters"]) == 2


# membership ---------------------------------------------------------------------------------------
def test_membership_g_in_zero():
    assert membership_report(get_map("g"), -0.1, 0) == "LikelyIn"


def test_membership_h_not_in_infinity():
    assert membership_report(get_map("h"), -15, INF) == "LikelyOut"


def test_membership_on_attracting_cycle():
    # 0 is an attracting fixed point of 0.5 z e^z; its basin is not in I_inf
    assert membership_report(get_map("lambda_z_exp"), 0.0, INF) == "LikelyOut"
    assert membership_report(get_map("lambda_z_exp"), 0.3, INF) == "LikelyOut"


def test_membership_fatou_escapes():
    assert membership_report(get_map("fatou"), 0.1, INF) == "LikelyIn"


def test_membership_hit_is_undecided():
    assert membership_report(get_map("h"), 0, INF) == "Undecided"


# invariance -----------------------------------------------------------------------------------
@pytest.mark.parametrize("label,z,targets", [("g", -0.1, [0]), ("g", -0.3 + 0.05j, [0]),
                                             ("h", -15, [INF, 0]), ("f", -0.2, [INF])])
def test_radius_halving_keeps_tail(label, z, targets):
    fmap = get_map(label)
    cover = build_cover(targets, 0.15)
    a = classify_escape(fmap, z, cover)
    b = classify_escape(fmap, z, cover.halved())
    assert a.escaping and b.escaping
    assert eventually_equal(a.eventual_tail, b.eventual_tail)


@pytest.mark.parametrize("label,z,targets", [("g", -0.1, [0]), ("h", -15, [INF, 0]),
                                             ("f", -0.2, [INF])])
def test_class_preserved_by_forward_step(label, z, targets):
    from essdyn import evaluate
    fmap = get_map(label)
    cover = build_cover(targets)
    a = classify_escape(fmap, z, cover)
    b = classify_escape(fmap, evaluate(fmap, z).value, cover)
    assert type(a) is type(b)
    assert eventually_equal(a.eventual_tail, b.eventual_tail)


def test_undecided_is_json():
    assert json.loads(json.dumps(Undecided("budget").to_json()))["class"] == "Undecided"
