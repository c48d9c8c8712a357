"""Escaping hairs, singular orbits and numeric checks of the absorbing regions of g."""

from __future__ import annotations

import cmath
import io
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.stats import qmc

from . import engine
from .catalog import get_map
from .escape import (DEFAULT_BUDGETS, DEFAULT_RADIUS, ItinerarySeq, OUTSIDE, build_cover,
                     classify_many, decision_to_class, eventually_equal)
from .kernel import AtInfinity, Finite, OverflowedToInfinity, UndefinedSingular, evaluate, evaluate_batch
from .rules import Window
from .singlab import preimage_points, singularities_in_window
from .sphere import INF, as_point, chordal_distance, format_point, point_to_json

__all__ = [
    "Segment", "RayToInfinity", "PullbackCurve", "DegenerateCurve", "EndpointNotSingular",
    "HairTrace", "trace_hair", "SingularOrbit", "LimitDidNotStabilize", "singular_orbit",
    "RegionSpec", "region_membership", "verify_absorbing", "verify_translation",
    "hair_preset", "HAIR_PRESETS",
]

PI = math.pi
R_CIRCLE = 2 / PI  # radius of the circles C_{+-2/pi}
STABLE_TOL = 1e-5
MATCH_TOL = 1e-4
MIN_SAMPLES = 8
RETURN_STEPS = 20


# curves ---------------------------------------------------------------------------
class DegenerateCurve(ValueError):
    pass


class EndpointNotSingular(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    """Straight segment from ``start`` to ``end``; parameter runs from t0 to t1."""

    start: complex
    end: complex
    t0: float = 0.0
    t1: float = 1.0

    def __post_init__(self):
        if self.start == self.end or self.t0 == self.t1:
            raise DegenerateCurve("segment has zero length")

    def point(self, t):
        u = (np.asarray(t, dtype=float) - self.t0) / (self.t1 - self.t0)
        return self.start + u * (self.end - self.start)

    def oriented(self, endpoint):
        """Copy whose ``end`` is the end chordally nearer to ``endpoint``."""
        if chordal_distance(self.start, endpoint) < chordal_distance(self.end, endpoint):
            return Segment(self.end, self.start, self.t1, self.t0)
        return self

    def sample_params(self, n):
        # uniform in t, ordered from the far end toward the end near the endpoint
        return np.linspace(self.t0, self.t1, n)

    def approach(self, endpoint, s):
        """Points approaching ``endpoint`` as s -> 0 along the line through the near end."""
        s = np.asarray(s, dtype=float)
        if endpoint is INF:
            u = (self.end - self.start) / abs(self.end - self.start)
            return self.end + (1.0 / s - 1.0) * u
        return endpoint + s * (self.end - endpoint)

    def describe(self):
        return f"segment[{self.start}, {self.end}]"


@dataclass(frozen=True)
class RayToInfinity:
    """``base + direction * (1/t - 1)`` for t in (0, 1]; t -> 0 runs off to infinity."""

    base: complex
    direction: complex = -1.0

    def __post_init__(self):
        if self.direction == 0:
            raise DegenerateCurve("ray direction is zero")

    def point(self, t):
        t = np.asarray(t, dtype=float)
        u = self.direction / abs(self.direction)
        return self.base + (1.0 / t - 1.0) * u

    def oriented(self, endpoint):
        return self

    def sample_params(self, n):
        return 2.0 ** -np.arange(n, dtype=float)

    def approach(self, endpoint, s):
        return self.point(s)

    def describe(self):
        return f"ray[{self.base}, dir {self.direction}]"


def _pullback_h(w, branch, iters=40):
    """Solve -e^z + 1/z = w by the fixed-point iteration z = log(1/z - w) + 2 pi i k."""
    z = np.log(-w) + 2j * PI * branch
    for _ in range(iters):
        z = np.log(1.0 / z - w) + 2j * PI * branch
    return z


@dataclass(frozen=True)
class PullbackCurve:
    """Pull-back under an inverse branch of h of the ray 1/t + i*pi (an I_inf hair of h).

    Along the ray -e^z carries the line Im z = pi onto large positive
    reals, so both the ray and its pull-back escape to infinity.
    """

    branch: int = 0
    height: float = PI

    def point(self, t):
        t = np.asarray(t, dtype=float)
        w = 1.0 / t + 1j * self.height
        return _pullback_h(w.astype(complex), self.branch)

    def oriented(self, endpoint):
        return self

    def sample_params(self, n):
        return 0.1 * 2.0 ** -np.arange(n, dtype=float)

    def approach(self, endpoint, s):
        return self.point(s)

    def describe(self):
        return f"pullback of 1/t + {self.height}i, branch {self.branch}"


# hair traces ----------------------------------------------------------------------
def _in_singular_set(fmap, p, tol=1e-9):
    if p is INF:
        return fmap.singularity_rule.has_infinity
    dist, _ = fmap.singularity_rule.nearest(np.array([complex(p)]))
    return bool(dist[0] <= tol * max(1.0, abs(p)))


def is_presingular(fmap, p, order=3, tol=1e-9):
    """Whether p lies in B(f) or f^j(p) lies there for some j <= order."""
    p = as_point(p)
    for _ in range(order + 1):
        if _in_singular_set(fmap, p, tol):
            return True
        r = evaluate(fmap, p)
        if isinstance(r, UndefinedSingular):
            return True
        if isinstance(r, (AtInfinity, OverflowedToInfinity)):
            p = INF
        else:
            p = r.value
    return _in_singular_set(fmap, p, tol)


@dataclass
class HairTrace:
    map_label: str
    curve: object
    endpoint: object
    samples: list  # (t, z) pairs
    classes: list
    itineraries: list
    common_itinerary: Optional[ItinerarySeq]
    disagreement: Optional[tuple] = None  # first pair (i, j) that failed
    cover: object = None
    budgets: tuple = DEFAULT_BUDGETS

    @property
    def all_escaping(self):
        return all(c.escaping for c in self.classes)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("t,re,im,class\n")
        for (t, z), c in zip(self.samples, self.classes):
            out.write(f"{t!r},{z.real!r},{z.imag!r},{c.name}\n")
        return out.getvalue()

    def to_json(self):
        return {
            "map": self.map_label, "curve": self.curve.describe(),
            "endpoint": point_to_json(self.endpoint),
            "samples": [{"t": t, "z": point_to_json(z), "class": c.to_json()}
                        for (t, z), c in zip(self.samples, self.classes)],
            "common_itinerary": self.common_itinerary.to_json() if self.common_itinerary else None,
            "disagreement": list(self.disagreement) if self.disagreement else None,
        }


def _itineraries(fmap, pts, cover, steps):
    orb = engine.BatchOrbit(fmap, pts, cover=cover, ring=1, record=True)
    orb.run(steps)
    out = []
    for i in range(len(pts)):
        syms = orb.orbit_symbols(i)
        first = next((k for k, s in enumerate(syms) if s >= 0), None)
        if first is None:
            out.append(None)
            continue
        seq = tuple(cover.targets[s] if s >= 0 else OUTSIDE for s in syms[first:])
        out.append(ItinerarySeq(seq, first, terminated=orb.s.term[i] != engine.RUNNING))
    return out


def trace_hair(fmap, curve, endpoint, cover=None, budgets=DEFAULT_BUDGETS,
               sample_count: int = 16) -> HairTrace:
    """Classify samples along ``curve`` and test for a common eventual itinerary."""
    if sample_count < MIN_SAMPLES:
        raise ValueError(f"sample_count must be >= {MIN_SAMPLES}")
    endpoint = as_point(endpoint)
    if not is_presingular(fmap, endpoint):
        raise EndpointNotSingular(f"{format_point(endpoint)} is not a (pre-)singularity of {fmap.label}")
    curve = curve.oriented(endpoint)
    if cover is None:
        targets = [endpoint]
        if fmap.singularity_rule.has_infinity and endpoint is not INF:
            targets.append(INF)
        cover = build_cover(targets, DEFAULT_RADIUS)
    ts = curve.sample_params(sample_count)
    zs = np.asarray(curve.point(ts), dtype=complex)
    if np.unique(zs).size < 2:
        raise DegenerateCurve("curve samples coincide")
    res = classify_many(fmap, zs, cover, budgets)
    classes = [decision_to_class(cover, res.decision, i) for i in range(zs.size)]
    steps = int(res.budget_used.max()) - 1
    its = _itineraries(fmap, zs, cover, steps)
    common, bad = None, None
    if all(c.escaping for c in classes) and all(it is not None for it in its):
        for i in range(len(its)):
            for j in range(i + 1, len(its)):
                if not eventually_equal(its[i], its[j]):
                    bad = (i, j)
                    break
            if bad:
                break
        if bad is None:
            common = its[0]
    else:
        bad = next(((i, i) for i, c in enumerate(classes) if not c.escaping or its[i] is None), None)
    samples = [(float(t), complex(z)) for t, z in zip(ts, zs)]
    return HairTrace(fmap.label, curve, endpoint, samples, classes, its, common, bad, cover,
                     tuple(budgets))


# singular orbits --------------------------------------------------------------------
class LimitDidNotStabilize(ArithmeticError):
    def __init__(self, k):
        super().__init__(f"endpoint limit of f^{k} did not stabilize")
        self.k = k


PERIODIC, PRE_PERIODIC, OSCILLATING, WANDERING, UNDECIDED = (
    "Periodic", "PrePeriodic", "Oscillating", "Wandering", "Undecided")


@dataclass
class SingularOrbit:
    points: list  # matched points of B^-(f), p_0 first (None when unmatched)
    limits: list  # numeric endpoint limits
    residuals: list
    classification: str
    period: Optional[int] = None
    preperiod: Optional[int] = None
    flags: tuple = ()

    def to_json(self):
        return {
            "points": [point_to_json(p) if p is not None else None for p in self.points],
            "limits": [point_to_json(p) for p in self.limits],
            "residuals": list(self.residuals),
            "classification": self.classification, "period": self.period,
            "preperiod": self.preperiod, "flags": list(self.flags),
        }


def _iterate_point(fmap, z, k):
    p = as_point(z)
    for _ in range(k):
        if p is INF and fmap.singularity_rule.has_infinity:
            return INF
        r = evaluate(fmap, p)
        if isinstance(r, Finite):
            p = r.value
        elif isinstance(r, UndefinedSingular):
            return r.singularity
        else:
            p = INF
    return p


def _richardson(v0, v1, v2):
    return (8 * v2 - 6 * v1 + v0) / 3


def _extrapolate(vals):
    """Richardson limit of three values on the sphere (t, t/2, t/4)."""
    if all(v is INF for v in vals):
        return INF
    if any(v is INF for v in vals) or abs(complex(vals[-1])) > 1.0:
        w = [0j if v is INF else 1 / complex(v) for v in vals]
        r = _richardson(*w)
        return INF if r == 0 else 1 / r
    return _richardson(*[complex(v) for v in vals])


def endpoint_limit(fmap, curve, endpoint, k, s0=0.5, levels=48, tol=STABLE_TOL):
    """lim f^k(gamma(s)) as gamma(s) -> endpoint, from samples at s, s/2, s/4, ..."""
    ss = s0 * 2.0 ** -np.arange(levels, dtype=float)
    pts = np.atleast_1d(curve.approach(endpoint, ss))
    vals = []
    prev = None
    for j, z in enumerate(pts):
        vals.append(_iterate_point(fmap, complex(z), k))
        if len(vals) >= 3:
            est = _extrapolate(vals[-3:])
            if prev is not None and chordal_distance(est, prev) <= tol:
                return est
            prev = est
    raise LimitDidNotStabilize(k)


def _candidates(fmap, p):
    """Window points of B(f) and of f^{-1}(B(f)) near p."""
    if p is INF:
        return [INF] if fmap.singularity_rule.has_infinity else []
    win = Window.around(complex(p), 0.5)
    pts = singularities_in_window(fmap, win, sphere=True)
    try:
        pts += preimage_points(fmap, fmap.singularity_rule, win, grid=16)
    except (ValueError, ArithmeticError):
        pass
    return pts


def _classify_prefix(points, multi_target):
    n = len(points)
    if any(p is None for p in points):
        return UNDECIDED, None, None, ()
    same = lambda a, b: (a is INF and b is INF) or (a is not INF and b is not INF and a == b)
    for m in range(0, n):
        for q in range(1, (n - m) // 2 + 1):
            if all(same(points[i], points[i + q]) for i in range(m, n - q)):
                return (PERIODIC if m == 0 else PRE_PERIODIC), q, m, ()
    distinct = []
    for p in points:
        if not any(same(p, d) for d in distinct):
            distinct.append(p)
    if len(distinct) == n:
        return WANDERING, None, None, ("heuristic",)
    if multi_target:
        return OSCILLATING, None, None, ()
    return UNDECIDED, None, None, ()


def singular_orbit(fmap, hair: HairTrace, steps: int, tol=STABLE_TOL, match_tol=MATCH_TOL) -> SingularOrbit:
    """Singular orbit p_0, ..., p_n of the hair's endpoint.

    p_k is the endpoint limit of f^k along the hair, matched to the nearest
    window point of B^-(f).  The finite prefix is classified as periodic,
    pre-periodic, wandering (all distinct; flagged heuristic) or
    oscillating (several targets in the hair's escape class).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    p0 = hair.endpoint
    limits, points, residuals = [p0], [p0], [0.0]
    for k in range(1, steps + 1):
        lim = endpoint_limit(fmap, hair.curve, p0, k, tol=tol)
        cands = _candidates(fmap, lim)
        best = min(cands, key=lambda c: chordal_distance(c, lim), default=None)
        d = chordal_distance(best, lim) if best is not None else math.inf
        limits.append(lim)
        points.append(best if d <= match_tol else None)
        residuals.append(float(d))
    targets = set()
    for c in hair.classes:
        sym = getattr(c, "symbols", None) or ((c.target,) if hasattr(c, "target") else ())
        targets.update("inf" if s is INF else complex(s) for s in sym)
    cls, per, pre, flags = _classify_prefix(points, len(targets) > 1)
    return SingularOrbit(points, limits, residuals, cls, per, pre, flags)


# presets ------------------------------------------------------------------------------
HAIR_PRESETS = {
    "f-wandering": ("f", lambda: Segment(-PI / 4 + 0.01, -0.01), 0j, (0j, INF)),
    "g-baker": ("g", lambda: Segment(-PI / 4 + 0.01, -0.01), 0j, (0j,)),
    "h-ray": ("h", lambda: Segment(-5.0, -20.0), INF, (INF, 0j)),
    "h-inf": ("h", lambda: PullbackCurve(), INF, (INF, 0j)),
}


def hair_preset(name):
    """(map, curve, endpoint, cover) for a named preset."""
    try:
        label, curve, endpoint, targets = HAIR_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown hair preset {name!r}; known: {', '.join(HAIR_PRESETS)}") from None
    return get_map(label), curve(), endpoint, build_cover(targets, DEFAULT_RADIUS)


# regions ---------------------------------------------------------------------------
@dataclass(frozen=True)
class RegionSpec:
    """Regions built from T_0, the circles C_r and the upper half-plane T_inf.

    kinds: "T0" (|z + pi/8| < pi/8), "disc" (|z - i r| < r), "V0" (inside T0,
    outside the closed discs of C_{2/pi} and C_{-2/pi}), "Tinf" (Im z > height).
    ``k`` translates by 2 pi k.
    """

    kind: str = "V0"
    k: int = 0
    r: float = R_CIRCLE
    height: float = 3.0

    def __post_init__(self):
        if self.kind not in ("T0", "disc", "V0", "Tinf"):
            raise ValueError(f"unknown region kind {self.kind!r}")

    def _local(self, z):
        z = np.asarray(z, dtype=complex) - 2 * PI * self.k
        return z.real, z.imag

    def contains(self, z):
        x, y = self._local(z)
        if self.kind == "Tinf":
            out = y > self.height
        elif self.kind == "disc":
            out = x * x + y * y < 2 * self.r * y
        else:
            in_t0 = x * x + y * y < -(PI / 4) * x
            if self.kind == "T0":
                out = in_t0
            else:
                rr = 2 * R_CIRCLE * np.abs(y)
                out = in_t0 & (x * x + y * y >= rr)
        return out if np.ndim(out) else bool(out)

    def margin(self, z):
        """Signed distance-like slack: positive inside, negative outside (V0, T0 only)."""
        z = np.asarray(z, dtype=complex) - 2 * PI * self.k
        m_t0 = PI / 8 - np.abs(z + PI / 8)
        if self.kind == "T0":
            return m_t0
        if self.kind != "V0":
            raise ValueError("margin is defined for T0 and V0")
        m_up = np.abs(z - 1j * R_CIRCLE) - R_CIRCLE
        m_dn = np.abs(z + 1j * R_CIRCLE) - R_CIRCLE
        return np.minimum(m_t0, np.minimum(m_up, m_dn))

    def to_json(self):
        return {"kind": self.kind, "k": self.k, "r": self.r, "height": self.height}


def region_membership(region: RegionSpec, z) -> bool:
    return bool(region.contains(complex(z)))


def _sample_v0(n, seed, k, exclusion=1e-6):
    """Scrambled Halton points of V_k away from its boundary and from the tangency point."""
    region = RegionSpec("V0", k)
    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    lo = np.array([-PI / 4, -PI / 8])
    hi = np.array([0.0, PI / 8])
    got = []
    total = 0
    while total < n:
        u = qmc.scale(sampler.random(max(2 * (n - total), 1024)), lo, hi)
        z = u[:, 0] + 1j * u[:, 1] + 2 * PI * k
        ok = region.contains(z) & (region.margin(z) > exclusion) & (np.abs(z - 2 * PI * k) > exclusion)
        z = z[ok]
        got.append(z)
        total += z.size
    return np.concatenate(got)[:n]


def verify_absorbing(fmap=None, samples=100_000, seed=0, k=0, band=1e-10) -> dict:
    """Numeric evidence that the region V_k is absorbing for g.

    Checks (A) g(z) in V_k, (B) Re z < Re g(z) < 2 pi k and (C)
    |Im g(z)| <= |Im z| at quasi-uniform samples, using the displacement
    g(z) - z computed without cancellation.  For a map with a shift (f =
    g + 2 pi) the shift is removed before the checks.  Violations closer
    than ``band`` to the boundary of V_k are not counted.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    fmap = get_map("g") if fmap is None else fmap
    z = _sample_v0(samples, seed, k)
    if fmap.displacement is not None:
        # f(z) = z + displacement(z) + shift
        d, st = evaluate_batch(fmap, z, fmap.displacement)
        gz = z + d
    else:
        gz, st = evaluate_batch(fmap, z)
        gz = gz - fmap.shift
        d = gz - z
    region = RegionSpec("V0", k)
    ok = st == 0
    core = region.margin(z) > band
    inside = region.contains(gz) & ok
    x0 = 2 * PI * k
    right = (d.real > 0) & ((gz.real - x0) < 0) & ok
    contract = (np.abs(gz.imag) <= np.abs(z.imag)) & ok
    viol = {"A": int((~inside & core).sum()), "B": int((~right & core).sum()),
            "C": int((~contract & core).sum())}
    reentry = _reentry(fmap, gz[~inside & core & ok], region)
    margins = {
        "A": float(region.margin(gz[ok]).min()) if ok.any() else None,
        "B_right": float(d.real[ok].min()) if ok.any() else None,
        "B_left_of_zero": float((x0 - gz.real[ok]).min()) if ok.any() else None,
        "C": float((np.abs(z.imag) - np.abs(gz.imag))[ok].min()) if ok.any() else None,
    }
    return {"region": region.to_json(), "map": fmap.label, "samples": int(z.size), "seed": seed,
            "violations": viol, "min_margins": margins, "max_deviation": None,
            "undefined": int((~ok).sum()), "reentry": reentry}


def _reentry(fmap, w, region, max_steps=RETURN_STEPS):
    """Further steps after which points that left the region are back in it."""
    steps = np.zeros(w.size, dtype=np.int64)
    pending = np.ones(w.size, dtype=bool)
    for n in range(1, max_steps + 1):
        if not pending.any():
            break
        idx = np.flatnonzero(pending)
        v, st = evaluate_batch(fmap, w[idx])
        v = v - fmap.shift
        w[idx] = v
        back = (st == 0) & region.contains(v)
        steps[idx[back]] = n
        pending[idx[back]] = False
        pending[idx[st != 0]] = False
    return {"left": int(w.size), "never_returned": int(pending.sum()),
            "max_extra_steps": int(steps.max()) if w.size else 0}


def verify_translation(fmap=None, height=3.0, samples=10_000, seed=0, re_range=(-10.0, 10.0),
                       span=6.0) -> dict:
    """max |g(w) - (w + 1)| over quasi-uniform samples of [re_range] x [height, height + span]."""
    if height < 3:
        raise ValueError("height must be >= 3")
    fmap = get_map("g") if fmap is None else fmap
    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    u = qmc.scale(sampler.random(samples), [re_range[0], height], [re_range[1], height + span])
    w = u[:, 0] + 1j * u[:, 1]
    if fmap.displacement is not None:
        d, st = evaluate_batch(fmap, w, fmap.displacement)
        dev = np.abs(d + fmap.shift - 1.0)
    else:
        v, st = evaluate_batch(fmap, w)
        dev = np.abs(v - (w + 1.0))
    dev = np.where(st == 0, dev, np.inf)
    return {"region": RegionSpec("Tinf", height=height).to_json(), "map": fmap.label,
            "samples": int(w.size), "seed": seed, "violations": None, "min_margins": None,
            "max_deviation": float(dev.max())}
