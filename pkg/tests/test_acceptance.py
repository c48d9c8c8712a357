"""Acceptance suite: one test per criterion, each timed against its budget.

Every test records a PASS or FAIL line; the lines are printed together at
the end of the pytest run (see conftest.py) and immediately as each test
finishes, so ``pytest -s`` shows them in order too.
"""

import json
import math
import time
from contextlib import contextmanager
from itertools import combinations

import numpy as np
import pytest

from essdyn import INF, chordal_distance, get_map, iterate_map, map_labels
from essdyn.cli import main as cli_main
from essdyn.escape import (EscapingOscillating, EscapingToPoint, EventualSeq, build_cover,
                           classify_escape, classify_many, decision_to_class, eventually_equal,
                           membership_report)
from essdyn.hairs import _sample_v0, hair_preset, singular_orbit, trace_hair, verify_translation
from essdyn.kernel import compose_maps, evaluate_batch
from essdyn.render import RenderConfig, encode_image, ppm_bytes, probe_point, render_plane
from essdyn.rules import Window
from essdyn.singlab import (Count, CountInfinite, Indeterminate, composition_class_count,
                            singularities_in_window)

from oracles import (CMATH_MAPS, PI, chordal_oracle, derivative_fd, eventually_periodic_words,
                     safe_points, seeded, shift_orbits_meet, unroll)

RESULTS = []


@contextmanager
def criterion(number, title, limit):
    """Time the body, check the runtime budget and record one result line."""
    notes = []
    t = time.perf_counter()
    try:
        yield notes
    except BaseException as err:
        dt = time.perf_counter() - t
        _record(f"FAIL  {number}. {title} [{dt:.2f}s / {limit:g}s] {str(err).splitlines()[0]}")
        raise
    dt = time.perf_counter() - t
    extra = ("; " + "; ".join(notes)) if notes else ""
    if dt >= limit:
        _record(f"FAIL  {number}. {title} [{dt:.2f}s / {limit:g}s] runtime over budget{extra}")
        pytest.fail(f"runtime {dt:.2f}s exceeds {limit}s")
    _record(f"PASS  {number}. {title} [{dt:.2f}s / {limit:g}s]{extra}")


def _record(line):
    RESULTS.append(line)
    print("\n" + line)


# 1 ---------------------------------------------------------------------------------------------
def test_criterion_1_absorbing_domain(tmp_path):
    out = tmp_path / "v0.json"
    with criterion(1, "V0 absorbing under g, 1e5 samples", 10) as notes:
        assert cli_main(["--out", str(out), "verify-v0", "--samples", "100000"]) == 0
        rep = json.loads(out.read_text())
        v = rep["violations"]
        notes.append(f"violations {v}")
        assert rep["samples"] == 100_000
        assert v["B"] == 0, f"drift violations {v['B']}"
        assert v["C"] == 0, f"contraction violations {v['C']}"
        assert v["A"] == 0, (f"containment violations A={v['A']} (min margin "
                             f"{rep['min_margins']['A']:.3g}; all re-enter V0 within "
                             f"{rep['reentry']['max_extra_steps']} steps, never_returned="
                             f"{rep['reentry']['never_returned']})")


# 2 ---------------------------------------------------------------------------------------------
def test_criterion_2_baker_translation():
    with criterion(2, "g(w) close to w+1 high in the upper half plane", 5) as notes:
        hi = verify_translation(height=6, samples=10_000)["max_deviation"]
        lo = verify_translation(height=3, samples=10_000)["max_deviation"]
        notes.append(f"Im>=6: {hi:.3g}, Im>=3: {lo:.3g}")
        assert hi < 5e-3
        assert lo < 0.11


# 3 ---------------------------------------------------------------------------------------------
def test_criterion_3_wandering_hair():
    with criterion(3, "f hair singular orbit is {2 pi k}, wandering", 30) as notes:
        fmap, curve, endpoint, cover = hair_preset("f-wandering")
        assert curve.start == -PI / 4 + 0.01 and curve.end == -0.01
        trace = trace_hair(fmap, curve, endpoint, cover)
        so = singular_orbit(fmap, trace, 8)
        err = max(abs(so.limits[k] - 2 * PI * k) for k in range(9))
        notes.append(f"max |p_k - 2 pi k| = {err:.2g}")
        assert len(so.points) == 9
        for k in range(9):
            assert abs(so.points[k] - 2 * PI * k) <= 1e-4
        assert err <= 1e-4
        assert so.classification == "Wandering"
        assert "heuristic" in so.flags


# 4 ---------------------------------------------------------------------------------------------
def test_criterion_4_period_two_oscillation():
    with criterion(4, "h at -15 oscillates with period 2, not in I_inf", 5):
        h = get_map("h")
        cls = classify_escape(h, -15, build_cover([INF, 0]))
        assert isinstance(cls, EscapingOscillating)
        tail = cls.eventual_tail
        assert tail.period == 2 and cls.period == 2
        assert set(tail.cycle) == {INF, 0j}
        assert membership_report(h, -15, INF) == "LikelyOut"


# 5 ---------------------------------------------------------------------------------------------
def _expected_count(tag, n):
    if tag == "E":
        return Count(1)
    if tag == "P1":
        return Count(1) if n == 1 else Count(2)
    if tag == "P2":
        return Count(2)
    if tag == "M":
        return Count(1) if n == 1 else (Indeterminate() if n == 2 else CountInfinite())
    m = int(tag[1:])
    if n == 1:
        return Count(m)
    if m == 2:
        return Indeterminate() if n == 2 else CountInfinite()
    return CountInfinite()


def test_criterion_5_singularity_algebra():
    with criterion(5, "singularity sets of compositions and iterates", 30):
        comp = compose_maps(get_map("exp"), get_map("zsq_over_zm1"))
        b = singularities_in_window(comp, Window(-4, 4, -4, 4), sphere=True)
        assert len(b) == 2 and INF in b
        assert any(p is not INF and abs(p - 1) < 1e-12 for p in b)
        f2 = iterate_map(get_map("exp_over_z"), 2)
        b2 = singularities_in_window(f2, Window(-4, 4, -4, 4), sphere=True)
        assert INF in b2 and any(p is not INF and abs(p) < 1e-12 for p in b2)
        for tag in ["E", "P1", "P2", "M", "K2", "K3", "K4", "K7"]:
            for n in range(1, 21):
                assert composition_class_count(tag, n) == _expected_count(tag, n), (tag, n)


# 6 ---------------------------------------------------------------------------------------------
WINDOW, SHIFTS = 40, 16


def _windows(word):
    u = tuple(unroll(*word, SHIFTS + WINDOW))
    return {u[m:m + WINDOW] for m in range(SHIFTS)}


def _oracle_classes(words, wins):
    """Union words whose shift windows coincide (the brute-force relation)."""
    parent = list(range(len(words)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner = {}
    for i, ws in enumerate(wins):
        for w in ws:
            j = owner.setdefault(w, i)
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[ri] = rj
    return [find(i) for i in range(len(words))]


def test_criterion_6_symbolic_oracle():
    with criterion(6, "eventually_equal against the shift-orbit oracle", 10) as notes:
        alphabet = (0j, INF, 2 * PI + 0j)
        words = list(eventually_periodic_words(alphabet, 4, 4))
        assert len(words) == 14520
        wins = [_windows(w) for w in words]
        seqs = [EventualSeq(*w) for w in words]
        # the window-set form is the brute-force oracle itself; confirm on a sample
        rng = seeded(6)
        for _ in range(1500):
            i, j = rng.randrange(len(words)), rng.randrange(len(words))
            assert (not wins[i].isdisjoint(wins[j])) == shift_orbits_meet(words[i], words[j])
        root = _oracle_classes(words, wins)
        reps = {}
        for i, r in enumerate(root):
            reps.setdefault(r, i)
        # every word against one representative of every oracle class
        checked = 0
        for i, s in enumerate(seqs):
            for r, k in reps.items():
                assert bool(eventually_equal(s, seqs[k])) == (root[i] == r), (words[i], words[k])
                checked += 1
        # all pairs of the prefix <= 2, period <= 3 subfamily, directly against the oracle
        small = [i for i, w in enumerate(words) if len(w[0]) <= 2 and len(w[1]) <= 3]
        for i, j in combinations(small, 2):
            assert bool(eventually_equal(seqs[i], seqs[j])) == (not wins[i].isdisjoint(wins[j]))
            checked += 1
        notes.append(f"{len(words)} words, {len(reps)} oracle classes, {checked} comparisons")


# 7 ---------------------------------------------------------------------------------------------
def _corpus():
    zv = _sample_v0(34, 11, 0)
    rng = np.random.default_rng(7)
    zh = -np.linspace(6, 40, 16) + 1j * rng.uniform(-0.5, 0.5, 16)
    return [("g", zv[:17], [0]), ("f", zv[17:], [INF]), ("h", zh, [INF, 0])]


def _classes(fmap, pts, cover):
    res = classify_many(fmap, np.asarray(pts, dtype=complex), cover)
    return [decision_to_class(cover, res.decision, i) for i in range(len(pts))]


def test_criterion_7_classifier_invariance():
    with criterion(7, "escape classes invariant on a 50-point corpus", 60) as notes:
        total = 0
        for label, pts, targets in _corpus():
            fmap = get_map(label)
            cover = build_cover(targets)
            base = _classes(fmap, pts, cover)
            halved = _classes(fmap, pts, cover.halved())
            step, _ = evaluate_batch(fmap, np.asarray(pts))
            forward = _classes(fmap, step, cover)
            powers = [_classes(iterate_map(fmap, n), pts, cover) for n in (2, 3)]
            for k, z in enumerate(pts):
                a = base[k]
                assert a.escaping, (label, z, a)
                assert halved[k].escaping and eventually_equal(a.eventual_tail,
                                                               halved[k].eventual_tail), (label, z)
                assert type(forward[k]) is type(a), (label, z, forward[k])
                assert eventually_equal(a.eventual_tail, forward[k].eventual_tail), (label, z)
                for n, cls in zip((2, 3), powers):
                    assert cls[k].escaping, (label, n, z, cls[k])
                total += 1
        assert total == 50
        notes.append("50 points across g, f, h")


# 8 ---------------------------------------------------------------------------------------------
def test_criterion_8_numeric_kernel():
    with criterion(8, "derivatives, conjugation symmetry and chordal axioms", 10) as notes:
        worst = 0.0
        for label in map_labels():
            fmap, f = get_map(label), CMATH_MAPS[label]
            pts = safe_points(label, 1000, seeded(80 + len(label)))
            d, st = evaluate_batch(fmap, np.array(pts), fmap.derivative_tree)
            assert (st == 0).all(), label
            fd = np.array([derivative_fd(f, z) for z in pts])
            rel = np.abs(d - fd) / np.abs(d)
            worst = max(worst, float(rel.max()))
            assert rel.max() <= 1e-6, (label, pts[int(rel.argmax())])
        rng = np.random.default_rng(8)
        z = rng.uniform(-3, 3, 1000) + 1j * rng.uniform(0.3, 3, 1000)
        for label in ("g", "f", "h", "fatou", "exp", "sin_lambda", "lambda_z_exp"):
            fmap = get_map(label)
            a, sa = evaluate_batch(fmap, z)
            b, sb = evaluate_batch(fmap, z.conj())
            assert np.array_equal(sa, sb), label
            ok = sa == 0
            assert np.all(np.abs(a[ok].conj() - b[ok]) <= 1e-12 * np.maximum(1, np.abs(a[ok]))), label
        pts = []
        for _ in range(3 * 10_000):
            u = rng.random()
            pts.append(INF if u < 0.05 else complex(*(rng.standard_normal(2) * (10 if u < 0.5 else 1))))
        for p, q, r in zip(pts[0::3], pts[1::3], pts[2::3]):
            dpq, dqr, dpr = chordal_distance(p, q), chordal_distance(q, r), chordal_distance(p, r)
            assert 0.0 <= dpq <= 2.0
            assert dpq == chordal_distance(q, p)
            assert chordal_distance(p, p) == 0.0
            assert dpr <= dpq + dqr + 1e-12
            assert math.isclose(dpq, chordal_oracle(None if p is INF else p, None if q is INF else q),
                                abs_tol=1e-12)
        notes.append(f"worst FD relative error {worst:.2g}")


# 9 ---------------------------------------------------------------------------------------------
FIG_CONFIG = dict(map="g", window=(-1.0, 0.6, -0.6, 0.6), width=400, height=300, budget=500)


def test_criterion_9_render_determinism(tmp_path):
    with criterion(9, "render byte-identical across tiles and workers", 120) as notes:
        digests = set()
        for tile in (16, 64, 256):
            for workers in (1, 4):
                cfg = RenderConfig(tile=tile, **FIG_CONFIG)
                img = render_plane(cfg, workers=workers)
                path = tmp_path / f"t{tile}_w{workers}.ppm"
                encode_image(img, path)
                data = path.read_bytes()
                assert data == ppm_bytes(img)
                digests.add(data)
        assert len(digests) == 1
        cfg = RenderConfig(**FIG_CONFIG)
        assert probe_point(cfg, -0.1) == EscapingToPoint(0j)
        cfg_f = RenderConfig(**dict(FIG_CONFIG, map="f", cover={"targets": ["inf"], "radius": 0.15}))
        assert probe_point(cfg_f, -0.1) == EscapingToPoint(INF)
        notes.append("6 renders identical")
