"""Forward orbits, omega-limit estimates and periodic cycles."""

from __future__ import annotations

import cmath
import io
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import engine
from .kernel import Finite, chart_derivative, derivative, evaluate
from .sphere import INF, SpherePoint, as_point, chordal_distance, format_point, point_to_json

__all__ = [
    "BudgetExhausted", "HitSingularity", "OverflowedToInfinity", "ConvergedToPoint",
    "EnteredCycle", "OrbitRecord", "iterate_orbit", "OmegaEstimate", "Cluster",
    "omega_limit", "TailTooShort", "CycleRecord", "NoConvergence", "refine_cycle",
    "classify_cycle", "classify_multiplier", "orbit_csv",
]

OMEGA_TAIL = 200
OMEGA_RHO = 0.05


# termination variants --------------------------------------------------------
@dataclass(frozen=True)
class BudgetExhausted:
    def __str__(self):
        return "BudgetExhausted"


@dataclass(frozen=True)
class HitSingularity:
    singularity: SpherePoint

    def __str__(self):
        return f"HitSingularity({format_point(self.singularity)})"


@dataclass(frozen=True)
class OverflowedToInfinity:
    def __str__(self):
        return "OverflowedToInfinity"


@dataclass(frozen=True)
class ConvergedToPoint:
    point: SpherePoint

    def __str__(self):
        return f"ConvergedToPoint({format_point(self.point)})"


@dataclass(frozen=True)
class EnteredCycle:
    period: int

    def __str__(self):
        return f"EnteredCycle({self.period})"


@dataclass
class OrbitRecord:
    """Iterates ``z0, f(z0), f^2(z0), ...`` (the start is element 0)."""

    start: SpherePoint
    iterates: List[SpherePoint]
    termination: object

    def __len__(self):
        return len(self.iterates)

    def to_csv(self) -> str:
        return orbit_csv(self)


def _termination(state, i, last):
    code = int(state.term[i])
    if code == engine.HIT:
        return HitSingularity(INF if state.hit_inf[i] else complex(state.hit_pt[i]))
    if code == engine.OVERFLOW:
        return OverflowedToInfinity()
    if code == engine.CONVERGED:
        return ConvergedToPoint(last)
    if code == engine.CYCLE:
        return EnteredCycle(0)
    return BudgetExhausted()


def _cycle_period(iterates):
    last = iterates[-1]
    for p in range(1, engine.MAX_CYCLE + 1):
        if len(iterates) > p and iterates[-1 - p] == last:
            return p
    return 0


def iterate_orbit(fmap, z0, budget: int) -> OrbitRecord:
    """Iterate until ``budget`` iterates are recorded (start included), a
    singularity is hit, the orbit overflows to an infinity in B(f), or the
    chordal step stays below 1e-13 for five consecutive steps.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    z0 = as_point(z0)
    zi = z0 is INF
    b = engine.BatchOrbit(fmap, [0j if zi else z0], [zi], ring=1, record=True)
    b.run(budget - 1)
    b.finish()
    its = b.orbit(0)
    term = _termination(b.s, 0, its[-1])
    if isinstance(term, EnteredCycle):
        term = EnteredCycle(_cycle_period(its))
    return OrbitRecord(z0, its, term)


def orbit_csv(orbit: OrbitRecord) -> str:
    out = io.StringIO()
    out.write("step,re,im\n")
    for k, p in enumerate(orbit.iterates):
        if p is INF:
            out.write(f"{k},inf,inf\n")
        else:
            out.write(f"{k},{p.real!r},{p.imag!r}\n")
    out.write(f"# termination: {orbit.termination}\n")
    return out.getvalue()


# omega limits ----------------------------------------------------------------
class TailTooShort(ValueError):
    pass


@dataclass(frozen=True)
class Cluster:
    center: SpherePoint
    radius: float
    hits: int

    def to_json(self):
        return {"center": point_to_json(self.center), "radius": self.radius, "hits": self.hits}


@dataclass
class OmegaEstimate:
    clusters: List[Cluster]
    tail_length: int
    confident: bool
    capped: bool = False  # more than the maximal number of clusters

    def to_json(self):
        return {"clusters": [c.to_json() for c in self.clusters], "tail_length": self.tail_length,
                "confident": self.confident, "capped": self.capped}


def _to_arrays(points):
    zi = np.array([p is INF for p in points], dtype=bool)
    z = np.array([0j if p is INF else complex(p) for p in points], dtype=complex)
    return z, zi


def _cluster_list(points, rho):
    z, zi = _to_arrays(points)
    cl = engine.cluster_tails(z[None, :], zi[None, :], np.ones((1, z.size), dtype=bool), rho)
    out = []
    for k in range(cl.hits.shape[1]):
        if cl.hits[0, k] > 0:
            c = INF if cl.center_inf[0, k] else complex(cl.center[0, k])
            out.append(Cluster(c, float(cl.radius[0, k]), int(cl.hits[0, k])))
    return out, int(cl.count[0]) > engine.MAX_CLUSTERS


def _extended(orbit: OrbitRecord, n: int):
    """Last ``n`` points of the orbit, continuing a detected limit if it stopped early."""
    its = list(orbit.iterates)
    t = orbit.termination
    # a settled orbit stays at its limit forever: the tail is the limit itself
    if isinstance(t, (ConvergedToPoint, OverflowedToInfinity)):
        its = its + [its[-1]] * n
    elif isinstance(t, EnteredCycle) and t.period > 0:
        cyc = its[-t.period:]
        its = its + cyc * (n // t.period + 1)
    return its[-n:] if len(its) >= n else None


def _same_clusters(a, b, rho):
    if len(a) != len(b):
        return False
    return all(any(chordal_distance(x.center, y.center) <= rho for y in b) for x in a)


def omega_limit(fmap, orbit: OrbitRecord, tail: int = OMEGA_TAIL, cluster_radius: float = OMEGA_RHO):
    """Cluster the last ``tail`` iterates; confident if doubling the tail agrees."""
    if isinstance(orbit.termination, HitSingularity):
        raise ValueError("orbit terminated at a singularity; its omega-limit is undefined")
    pts = _extended(orbit, tail)
    if pts is None:
        raise TailTooShort(f"orbit has {len(orbit)} iterates, tail {tail} requested")
    clusters, capped = _cluster_list(pts, cluster_radius)
    pts2 = _extended(orbit, 2 * tail)
    confident = False
    if pts2 is not None and not capped:
        clusters2, capped2 = _cluster_list(pts2, cluster_radius)
        confident = not capped2 and _same_clusters(clusters, clusters2, cluster_radius)
    return OmegaEstimate(clusters, tail, confident, capped)


# cycles -----------------------------------------------------------------------
SUPER_ATTRACTING = "SuperAttracting"
ATTRACTING = "Attracting"
REPELLING = "Repelling"
RATIONALLY_INDIFFERENT = "RationallyIndifferent"
IRRATIONALLY_INDIFFERENT = "IrrationallyIndifferent"

_UNIT_TOL = 1e-9
_ROOT_TOL = 1e-6
_ROOT_ORDER = 64
_ZERO_TOL = 1e-14


class NoConvergence(ArithmeticError):
    pass


@dataclass
class CycleRecord:
    points: List[SpherePoint]
    multiplier: complex
    cycle_class: str = ""
    residual: float = 0.0
    heuristic: bool = False  # indifferent classes rest on floating-point tests

    @property
    def period(self):
        return len(self.points)

    def to_json(self):
        return {"points": [point_to_json(p) for p in self.points],
                "multiplier": [self.multiplier.real, self.multiplier.imag],
                "class": self.cycle_class, "residual": self.residual,
                "heuristic": self.heuristic}


def classify_multiplier(lam: complex) -> str:
    a = abs(lam)
    if a <= _ZERO_TOL:
        return SUPER_ATTRACTING
    if abs(a - 1.0) <= _UNIT_TOL:
        theta = cmath.phase(lam) / (2 * math.pi)
        for q in range(1, _ROOT_ORDER + 1):
            p = round(theta * q)
            if abs(lam - cmath.exp(2j * math.pi * p / q)) <= _ROOT_TOL:
                return RATIONALLY_INDIFFERENT
        return IRRATIONALLY_INDIFFERENT
    return ATTRACTING if a < 1 else REPELLING


def classify_cycle(record: CycleRecord) -> str:
    return classify_multiplier(record.multiplier)


def _step(fmap, z):
    r = evaluate(fmap, z)
    if not isinstance(r, Finite):
        raise NoConvergence(f"orbit of the cycle seed left the finite plane at {z}")
    return r.value


def _orbit_and_derivative(fmap, z, p):
    pts = [z]
    dprod = 1 + 0j
    w = z
    for _ in range(p):
        d = derivative(fmap, w)
        if not isinstance(d, Finite):
            raise NoConvergence(f"derivative undefined at {w}")
        dprod *= d.value
        w = _step(fmap, w)
        pts.append(w)
    return pts, dprod


def refine_cycle(fmap, seed, period: int, max_steps: int = 60, tol: float = 1e-9) -> CycleRecord:
    """Newton on f^p(z) - z from ``seed``; returns the cycle with its multiplier.

    Iteration continues until the Newton step is at round-off level, so
    multiple roots (parabolic cycles) are still resolved to full precision.
    """
    if period < 1:
        raise ValueError("period must be >= 1")
    z = complex(as_point(seed))
    for _ in range(max_steps):
        pts, dp = _orbit_and_derivative(fmap, z, period)
        g = pts[-1] - z
        if g == 0:
            break
        if dp == 1:
            raise NoConvergence("Newton derivative vanished")
        dz = g / (dp - 1)
        z = z - dz
        if not (abs(z) < 1e6) or not math.isfinite(z.real):
            raise NoConvergence("Newton iterate diverged")
        if abs(dz) <= 1e-15 * max(1.0, abs(z)):
            break
    pts, _ = _orbit_and_derivative(fmap, z, period)
    residual = abs(pts[-1] - z)
    if not residual <= tol:
        raise NoConvergence(f"residual {residual:.3g} after {max_steps} Newton steps")
    cyc = pts[:-1]
    # minimal period
    for q in range(1, period + 1):
        if period % q == 0 and all(abs(cyc[i] - cyc[i % q]) <= tol for i in range(period)):
            cyc = cyc[:q]
            break
    lam = 1 + 0j
    for w in cyc:
        lam *= chart_derivative(fmap, w)
    cls = classify_multiplier(lam)
    heur = cls in (RATIONALLY_INDIFFERENT, IRRATIONALLY_INDIFFERENT)
    return CycleRecord(cyc, lam, cls, residual, heur)
