"""Escaping sets, separating covers, itineraries and the escaping-point taxonomy."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from . import engine
from .kernel import chart_derivative, evaluate_batch
from .orbits import OMEGA_RHO, OMEGA_TAIL, omega_limit, iterate_orbit
from .sphere import INF, SpherePoint, as_point, chordal_array, chordal_to, format_point, point_to_json

__all__ = [
    "SeparatingCover", "OverlappingCover", "build_cover", "OUTSIDE", "ItinerarySeq",
    "EventualSeq", "NeverEntersCover", "extract_itinerary", "eventually_equal", "Verdict",
    "EscapingToPoint", "EscapingPeriodic", "EscapingOscillating", "EscapingWandering",
    "NonEscaping", "Undecided", "classify_escape", "classify_many", "membership_report",
    "classification_report", "DEFAULT_BUDGETS", "DEFAULT_RADIUS",
]

DEFAULT_RADIUS = 0.15
DEFAULT_BUDGETS = (1000, 4000, 16000)
MEMBERSHIP_M = 50
CYCLE_TOL = 1e-9
STALL_TOL = 1e-9


# covers ------------------------------------------------------------------------
class OverlappingCover(ValueError):
    def __init__(self, k, j):
        super().__init__(f"cover balls {k} and {j} intersect")
        self.k, self.j = k, j


@dataclass(frozen=True)
class SeparatingCover:
    """Disjoint balls: Euclidean around finite targets, chordal around infinity."""

    targets: Tuple[SpherePoint, ...]
    radii: Tuple[float, ...]

    def __post_init__(self):
        if not self.targets:
            raise ValueError("a cover needs at least one target")
        if len(self.targets) != len(self.radii):
            raise ValueError("one radius per target")
        keys = set()
        for t, r in zip(self.targets, self.radii):
            if not r > 0:
                raise ValueError("radii must be positive")
            if t is INF and not r < 2:
                raise ValueError("a chordal radius around infinity must be < 2")
            key = "inf" if t is INF else complex(t)
            if key in keys:
                raise ValueError(f"duplicate target {t}")
            keys.add(key)
        n = len(self.targets)
        for k in range(n):
            for j in range(k + 1, n):
                if self._overlap(k, j):
                    raise OverlappingCover(k, j)

    def inf_modulus(self, r):
        """|z| beyond which a point is within chordal distance r of infinity."""
        return math.sqrt(4.0 / (r * r) - 1.0)

    def _overlap(self, k, j):
        a, b = self.targets[k], self.targets[j]
        ra, rb = self.radii[k], self.radii[j]
        if a is INF:
            a, b, ra, rb = b, a, rb, ra
        if b is INF:
            return abs(a) + ra > self.inf_modulus(rb)
        return abs(a - b) < ra + rb

    def symbols(self, z, zi):
        """Index of the ball containing each point, or -1."""
        z = np.asarray(z, dtype=complex)
        zi = np.asarray(zi, dtype=bool)
        out = np.full(z.shape, -1, dtype=np.int64)
        for k, (t, r) in enumerate(zip(self.targets, self.radii)):
            if t is INF:
                inside = zi | (np.abs(z) > self.inf_modulus(r))
            else:
                inside = ~zi & (np.abs(z - complex(t)) < r)
            out = np.where(inside & (out < 0), k, out)
        return out

    def symbol_of(self, p) -> int:
        p = as_point(p)
        return int(self.symbols(np.array([0j if p is INF else p]), np.array([p is INF]))[0])

    def index(self, target) -> int:
        target = as_point(target)
        for k, t in enumerate(self.targets):
            if (t is INF and target is INF) or (t is not INF and target is not INF and t == target):
                return k
        raise KeyError(target)

    def halved(self) -> "SeparatingCover":
        return SeparatingCover(self.targets, tuple(r / 2 for r in self.radii))

    def to_json(self):
        return {"targets": [point_to_json(t) for t in self.targets], "radii": list(self.radii)}


def build_cover(targets, radius: float = DEFAULT_RADIUS) -> SeparatingCover:
    """Uniform-radius cover of ``targets``; raises OverlappingCover if balls meet."""
    pts = tuple(as_point(t) for t in targets)
    return SeparatingCover(pts, tuple(float(radius) for _ in pts))


# itineraries -------------------------------------------------------------------
class _Outside:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "OUTSIDE"

    def __reduce__(self):
        return (_Outside, ())


OUTSIDE = _Outside()


def _sym_json(s):
    return "outside" if s is OUTSIDE else point_to_json(s)


@dataclass(frozen=True)
class EventualSeq:
    """The sequence ``prefix + cycle + cycle + ...`` (cycle non-empty)."""

    prefix: tuple
    cycle: tuple

    def __post_init__(self):
        if not self.cycle:
            raise ValueError("cycle must be non-empty")

    def __getitem__(self, n):
        if n < len(self.prefix):
            return self.prefix[n]
        return self.cycle[(n - len(self.prefix)) % len(self.cycle)]

    @property
    def period(self):
        return len(_primitive(self.cycle))

    def to_json(self):
        return {"prefix": [_sym_json(s) for s in self.prefix],
                "cycle": [_sym_json(s) for s in self.cycle]}


@dataclass(frozen=True)
class ItinerarySeq:
    """Finite symbol record starting at the first in-cover iterate ``offset``."""

    symbols: tuple
    offset: int
    terminated: bool = False

    def __len__(self):
        return len(self.symbols)

    def tail(self, window: int = OMEGA_TAIL, max_period: int = engine.MAX_CYCLE):
        """Periodic tail detected on the last ``window`` symbols, or None."""
        s = self.symbols
        w = s[-window:]
        for p in range(1, max_period + 1):
            if len(w) >= 2 * p and all(w[i] is w[i - p] or w[i] == w[i - p] for i in range(p, len(w))):
                # walk back to where the periodicity starts
                start = len(s) - len(w)
                while start > 0 and _same(s[start - 1], s[start - 1 + p]):
                    start -= 1
                return EventualSeq(tuple(s[:start]), tuple(s[start:start + p]))
        return None

    def to_json(self):
        t = self.tail()
        return {"offset": self.offset, "symbols": [_sym_json(x) for x in self.symbols],
                "tail": t.to_json() if t is not None else None}


def _same(a, b):
    return a is b or a == b


class NeverEntersCover(ValueError):
    pass


def extract_itinerary(fmap, z0, cover: SeparatingCover, budget: int) -> ItinerarySeq:
    """Symbols of the orbit of ``z0`` from its first iterate inside the cover."""
    orbit = iterate_orbit(fmap, z0, budget)
    z, zi = _arrays(orbit.iterates)
    idx = cover.symbols(z, zi)
    inside = np.flatnonzero(idx >= 0)
    if inside.size == 0:
        raise NeverEntersCover(f"no iterate of {format_point(as_point(z0))} lies in the cover")
    n0 = int(inside[0])
    syms = tuple(cover.targets[k] if k >= 0 else OUTSIDE for k in idx[n0:])
    from .orbits import BudgetExhausted
    return ItinerarySeq(syms, n0, terminated=not isinstance(orbit.termination, BudgetExhausted))


def _arrays(points):
    zi = np.array([p is INF for p in points], dtype=bool)
    z = np.array([0j if p is INF else complex(p) for p in points], dtype=complex)
    return z, zi


@lru_cache(maxsize=65536)
def _primitive(cycle: tuple) -> tuple:
    n = len(cycle)
    for p in range(1, n + 1):
        if n % p == 0 and all(_same(cycle[i], cycle[i % p]) for i in range(n)):
            return cycle[:p]
    return cycle


def _rotations_match(a: tuple, b: tuple) -> bool:
    if len(a) != len(b):
        return False
    n = len(a)
    return any(all(_same(a[(i + r) % n], b[i]) for i in range(n)) for r in range(n))


@dataclass(frozen=True)
class Verdict:
    equal: bool
    heuristic: bool = False

    def __bool__(self):
        return self.equal


def _window_match(s: tuple, t: tuple) -> bool:
    # some block of the second half of the shorter sequence occurs in the other one
    w = min(len(s), len(t)) // 2
    if w == 0:
        return False
    sb = s[len(s) - w:]
    tb = t[len(t) - w:]
    return _contains(t, sb) or _contains(s, tb)


def _contains(seq, block):
    n, w = len(seq), len(block)
    return any(all(_same(seq[i + k], block[k]) for k in range(w)) for i in range(n - w + 1))


def eventually_equal(s, t) -> Verdict:
    """Whether the shift orbits of ``s`` and ``t`` meet.

    Exact for :class:`EventualSeq` inputs (the primitive cycles must be
    rotations of each other).  Finite :class:`ItinerarySeq` records are
    first reduced to a detected periodic tail; failing that a window
    comparison is used.  Any inference from finite data is flagged.
    """
    heuristic = False
    es, et = s, t
    if isinstance(s, ItinerarySeq):
        es, heuristic = s.tail(), True
    if isinstance(t, ItinerarySeq):
        et, heuristic = t.tail(), True
    if isinstance(es, EventualSeq) and isinstance(et, EventualSeq):
        return Verdict(_rotations_match(_primitive(es.cycle), _primitive(et.cycle)), heuristic)
    ss = s.symbols if isinstance(s, ItinerarySeq) else _unroll(s, 64)
    ts = t.symbols if isinstance(t, ItinerarySeq) else _unroll(t, 64)
    return Verdict(_window_match(tuple(ss), tuple(ts)), True)


def _unroll(e: EventualSeq, n: int):
    return tuple(e[k] for k in range(len(e.prefix) + n))


# escape classes -------------------------------------------------------------------
class _ClassBase:
    name = ""
    escaping = False
    flags: tuple = ()

    def to_json(self):
        d = {"class": self.name, "flags": list(self.flags)}
        d.update(self._fields_json())
        return d

    def _fields_json(self):
        return {}

    @property
    def eventual_tail(self) -> Optional[EventualSeq]:
        return None


@dataclass(frozen=True)
class EscapingToPoint(_ClassBase):
    target: SpherePoint
    flags: tuple = ()
    name = "EscapingToPoint"
    escaping = True

    def _fields_json(self):
        return {"target": point_to_json(self.target)}

    @property
    def eventual_tail(self):
        return EventualSeq((), (self.target,))


@dataclass(frozen=True)
class EscapingPeriodic(_ClassBase):
    period: int
    cycle: tuple
    flags: tuple = ()
    name = "EscapingPeriodic"
    escaping = True

    def _fields_json(self):
        return {"period": self.period, "cycle": [point_to_json(p) for p in self.cycle]}

    @property
    def eventual_tail(self):
        return EventualSeq((), self.cycle)


@dataclass(frozen=True)
class EscapingOscillating(_ClassBase):
    symbols: tuple  # the symbol cycle when periodic, else the visited targets
    period: Optional[int] = None
    flags: tuple = ()
    name = "EscapingOscillating"
    escaping = True

    def _fields_json(self):
        return {"symbols": [point_to_json(p) for p in self.symbols], "period": self.period}

    @property
    def eventual_tail(self):
        return EventualSeq((), self.symbols) if self.period else None


@dataclass(frozen=True)
class EscapingWandering(_ClassBase):
    symbols: tuple = ()
    flags: tuple = ("heuristic",)
    name = "EscapingWandering"
    escaping = True

    def _fields_json(self):
        return {"symbols": [point_to_json(p) for p in self.symbols]}


@dataclass(frozen=True)
class NonEscaping(_ClassBase):
    detail: str = ""
    flags: tuple = ()
    name = "NonEscaping"

    def _fields_json(self):
        return {"detail": self.detail}


@dataclass(frozen=True)
class Undecided(_ClassBase):
    reason: str = ""
    flags: tuple = ()
    name = "Undecided"

    def _fields_json(self):
        return {"reason": self.reason}


# vectorized decision ------------------------------------------------------------
K_UNDECIDED, K_NONESC, K_PERIODIC, K_OSC, K_WANDER, K_POINT = 0, 1, 2, 3, 4, 5
F_STALLED, F_OVERFLOW, F_HEURISTIC, F_APERIODIC = 1, 2, 4, 8

_DETAILS = ["", "presingular", "attracting fixed point", "converged outside cover", "cycle",
            "attracting cycle", "overflow outside cover", "orbit leaves cover",
            "clusters inside one ball", "single cluster across balls", "budget"]
D = {name: i for i, name in enumerate(_DETAILS)}


@dataclass
class Decision:
    kind: np.ndarray
    target: np.ndarray
    period: np.ndarray
    flags: np.ndarray
    detail: np.ndarray
    cycle: np.ndarray  # (P, MAX_CYCLE) symbol cycle for periodic tails (-1 padded)
    decisive: np.ndarray
    ntargets: np.ndarray
    visited: np.ndarray  # (P, K) targets visited in the analysed tail

    @classmethod
    def empty(cls, n, k):
        z = lambda dt=np.int64: np.zeros(n, dtype=dt)
        return cls(z(), np.full(n, -1), z(), z(), z(), np.full((n, engine.MAX_CYCLE), -1),
                   np.zeros(n, dtype=bool), z(), np.zeros((n, max(k, 1)), dtype=bool))

    def take(self, sel, other, osel):
        for name in ("kind", "target", "period", "flags", "detail", "cycle", "decisive",
                     "ntargets", "visited"):
            getattr(self, name)[sel] = getattr(other, name)[osel]


def _modulus_derivative(fmap, z, zi):
    """|chart derivative| at a batch of points."""
    out = np.zeros(z.size)
    fin = ~zi
    if fin.any():
        v, st = evaluate_batch(fmap, z[fin], fmap.derivative_tree)
        out[fin] = np.where(st == 0, np.abs(v), np.inf)
    for i in np.flatnonzero(zi):
        try:
            out[i] = abs(chart_derivative(fmap, INF))
        except ArithmeticError:
            out[i] = np.inf
    return out


def _attracting_cycles(fmap, z, zi, valid, max_period=engine.MAX_CYCLE):
    """Period of a numerically closed attracting cycle at the end of each tail (0: none)."""
    P, W = z.shape
    per = np.zeros(P, dtype=np.int64)
    for p in range(1, max_period + 1):
        if 2 * p > W:
            break
        cols_a = np.arange(W - p, W)
        cols_b = cols_a - p
        ok = valid[:, cols_b].all(axis=1) & (per == 0)
        if not ok.any():
            continue
        d = chordal_array(z[:, cols_a], zi[:, cols_a], z[:, cols_b], zi[:, cols_b])
        close = ok & (d.max(axis=1) <= CYCLE_TOL)
        if not close.any():
            continue
        rows = np.flatnonzero(close)
        lam = np.ones(rows.size)
        for c in cols_a:
            lam = lam * _modulus_derivative(fmap, z[rows, c], zi[rows, c])
        per[rows[lam < 1.0]] = p
    return per


def analyze(fmap, cover, snap: engine.Snapshot, tail=OMEGA_TAIL, rho=OMEGA_RHO) -> Decision:
    """Classify a batch from its tail snapshot (decisions at one budget)."""
    P = snap.z.shape[0]
    K = len(cover.targets)
    dec = Decision.empty(P, K)
    term = snap.term
    last_z, last_i, last_s = snap.z[:, -1], snap.zi[:, -1], snap.sym[:, -1]
    inf_k = next((k for k, t in enumerate(cover.targets) if t is INF), -1)

    hit = term == engine.HIT
    dec.kind[hit], dec.detail[hit], dec.decisive[hit] = K_NONESC, D["presingular"], True

    ovf = term == engine.OVERFLOW
    if inf_k >= 0:
        dec.kind[ovf], dec.target[ovf], dec.flags[ovf] = K_POINT, inf_k, F_OVERFLOW
    else:
        dec.kind[ovf], dec.detail[ovf] = K_UNDECIDED, D["overflow outside cover"]
    dec.decisive[ovf] = True

    conv = np.flatnonzero(term == engine.CONVERGED)
    if conv.size:
        inside = last_s[conv] >= 0
        mod = _modulus_derivative(fmap, last_z[conv], last_i[conv])
        stalled = inside & (mod >= 1.0 - STALL_TOL)
        r = conv[stalled]
        dec.kind[r], dec.target[r], dec.flags[r] = K_POINT, last_s[r], F_STALLED
        r = conv[inside & ~stalled]
        dec.kind[r], dec.detail[r] = K_NONESC, D["attracting fixed point"]
        r = conv[~inside]
        dec.kind[r], dec.detail[r] = K_NONESC, D["converged outside cover"]
        dec.decisive[conv] = True

    cyc = term == engine.CYCLE
    dec.kind[cyc], dec.detail[cyc], dec.decisive[cyc] = K_NONESC, D["cycle"], True

    open_rows = np.flatnonzero((term == engine.BUDGET) | (term == engine.RUNNING))
    if open_rows.size == 0:
        return dec
    W = min(tail, snap.z.shape[1])
    z = snap.z[open_rows, -W:]
    zi = snap.zi[open_rows, -W:]
    sym = snap.sym[open_rows, -W:]
    valid = snap.valid[open_rows, -W:]
    allin = ((sym >= 0) | ~valid).all(axis=1)
    visited = np.stack([((sym == k) & valid).any(axis=1) for k in range(K)], axis=1)
    nT = visited.sum(axis=1)
    dec.visited[open_rows, :K] = visited
    dec.ntargets[open_rows] = nT
    dec.detail[open_rows] = D["budget"]

    rows_in = np.flatnonzero(allin)
    if rows_in.size:
        cl = engine.cluster_tails(z[rows_in], zi[rows_in], valid[rows_in], rho)
        nC = cl.count
        one = (nC == 1) & (nT[rows_in] == 1)
        r = open_rows[rows_in[one]]
        dec.kind[r], dec.decisive[r] = K_POINT, True
        dec.target[r] = sym[rows_in[one], -1]

        multi = (nC >= 2) & (nT[rows_in] >= 2)
        if multi.any():
            sub = rows_in[multi]
            per = engine.symbol_period(sym[sub], valid[sub])
            r = open_rows[sub]
            dec.kind[r] = K_OSC
            dec.period[r] = per
            periodic = per > 0
            dec.decisive[r[periodic]] = True
            dec.flags[r[~periodic]] |= F_APERIODIC
            for j in np.flatnonzero(periodic):
                p = per[j]
                dec.cycle[r[j], :p] = sym[sub[j], W - p:]

        ball = (nC >= 2) & (nT[rows_in] == 1)
        if ball.any():
            sub = rows_in[ball]
            per = _attracting_cycles(fmap, z[sub], zi[sub], valid[sub])
            r = open_rows[sub]
            att = per > 0
            dec.kind[r[att]], dec.detail[r[att]], dec.decisive[r[att]] = K_NONESC, D["attracting cycle"], True
            dec.detail[r[~att]] = D["clusters inside one ball"]
        odd = (nC == 1) & (nT[rows_in] >= 2)
        dec.detail[open_rows[rows_in[odd]]] = D["single cluster across balls"]

    rows_out = np.flatnonzero(~allin)
    if rows_out.size:
        per = _attracting_cycles(fmap, z[rows_out], zi[rows_out], valid[rows_out])
        r = open_rows[rows_out]
        att = per > 0
        dec.kind[r[att]], dec.detail[r[att]], dec.decisive[r[att]] = K_NONESC, D["attracting cycle"], True
        dec.period[r[att]] = per[att]
        dec.detail[r[~att]] = D["orbit leaves cover"]
    return dec


@dataclass
class BatchClassification:
    decision: Decision
    budget_used: np.ndarray
    distinct: np.ndarray  # (P, n_budgets) distinct symbols seen by each checkpoint (-1: not reached)
    length: np.ndarray


def classify_many(fmap, points, cover: SeparatingCover, budgets=DEFAULT_BUDGETS,
                  tail=OMEGA_TAIL, rho=OMEGA_RHO, points_inf=None) -> BatchClassification:
    """Classify many starting points at once (the vectorized engine behind classify_escape).

    Orbits run to the first budget; points with a decisive outcome stop
    there, the rest continue to the next budget.  At the final budget an
    aperiodic oscillation whose distinct-symbol count grew strictly across
    all budgets is reported as wandering (flagged heuristic).
    """
    budgets = tuple(int(b) for b in budgets)
    if not budgets or any(b < 1 for b in budgets) or list(budgets) != sorted(budgets):
        raise ValueError("budgets must be positive and increasing")
    pts = np.asarray(points, dtype=complex).ravel()
    n = pts.size
    K = len(cover.targets)
    orb = engine.BatchOrbit(fmap, pts, points_inf, cover, ring=2 * tail)
    final = Decision.empty(n, K)
    used = np.zeros(n, dtype=np.int64)
    distinct = np.full((n, len(budgets)), -1, dtype=np.int64)
    length = np.zeros(n, dtype=np.int64)
    open_ = np.ones(n, dtype=bool)
    for bi, b in enumerate(budgets):
        orb.run(b - 1)
        idx = np.flatnonzero(open_)
        if idx.size == 0:
            break
        # early checkpoints look at the later half of the orbit only
        width = max(1, min(tail, b // 2))
        snap = orb.snapshot(width=width, idx=idx)
        dec = analyze(fmap, cover, snap, width, rho)
        distinct[idx, bi] = snap.distinct
        last = bi == len(budgets) - 1
        take = dec.decisive | last
        if last and len(budgets) >= 3:
            osc = (dec.kind == K_OSC) & (dec.period == 0)
            grows = np.all(np.diff(distinct[idx], axis=1) > 0, axis=1)
            w = osc & grows
            dec.kind[w] = K_WANDER
            dec.flags[w] |= F_HEURISTIC
        sel = idx[take]
        final.take(sel, dec, np.flatnonzero(take))
        used[sel] = b
        length[sel] = snap.length[take]
        open_[sel] = False
        freeze = np.zeros(n, dtype=bool)
        freeze[sel] = True
        orb.freeze(freeze)
    return BatchClassification(final, used, distinct, length)


def _flag_names(bits):
    out = []
    if bits & F_STALLED:
        out.append("stalled")
    if bits & F_OVERFLOW:
        out.append("overflow")
    if bits & F_APERIODIC:
        out.append("aperiodic")
    if bits & F_HEURISTIC:
        out.append("heuristic")
    return tuple(out)


def decision_to_class(cover, dec: Decision, i: int):
    kind = int(dec.kind[i])
    flags = _flag_names(int(dec.flags[i]))
    T = cover.targets
    if kind == K_POINT:
        return EscapingToPoint(T[int(dec.target[i])], flags)
    if kind == K_OSC:
        p = int(dec.period[i])
        if p > 0:
            return EscapingOscillating(tuple(T[int(k)] for k in dec.cycle[i, :p]), p, flags)
        return EscapingOscillating(tuple(T[k] for k in np.flatnonzero(dec.visited[i])), None, flags)
    if kind == K_WANDER:
        return EscapingWandering(tuple(T[k] for k in np.flatnonzero(dec.visited[i])), flags)
    if kind == K_PERIODIC:
        p = int(dec.period[i])
        return EscapingPeriodic(p, tuple(T[int(k)] for k in dec.cycle[i, :p]), flags)
    if kind == K_NONESC:
        detail = _DETAILS[int(dec.detail[i])]
        if dec.detail[i] == D["attracting cycle"] and dec.period[i]:
            detail = f"attracting cycle of period {int(dec.period[i])}"
        return NonEscaping(detail, flags)
    return Undecided(_DETAILS[int(dec.detail[i])], flags)


def classify_escape(fmap, z0, cover: SeparatingCover, budgets=DEFAULT_BUDGETS,
                    tail=OMEGA_TAIL, rho=OMEGA_RHO):
    """Escape class of a single point (see :func:`classify_many`)."""
    z0 = as_point(z0)
    res = classify_many(fmap, [0j if z0 is INF else z0], cover, budgets, tail, rho,
                        points_inf=[z0 is INF])
    return decision_to_class(cover, res.decision, 0)


def classification_report(fmap, z0, cover: SeparatingCover, budgets=DEFAULT_BUDGETS,
                          tail=OMEGA_TAIL, rho=OMEGA_RHO) -> dict:
    """JSON-ready report: class, itinerary, omega clusters, budgets and flags."""
    z0 = as_point(z0)
    res = classify_many(fmap, [0j if z0 is INF else z0], cover, budgets, tail, rho,
                        points_inf=[z0 is INF])
    cls = decision_to_class(cover, res.decision, 0)
    used = int(res.budget_used[0])
    report = {"map": fmap.label, "point": point_to_json(z0), "class": cls.to_json(),
              "budgets": list(budgets), "budget_used": used, "cover": cover.to_json(),
              "flags": list(cls.flags)}
    try:
        it = extract_itinerary(fmap, z0, cover, used)
        report["itinerary"] = it.to_json()
        if len(it.symbols) > 2 * tail:
            report["itinerary"]["symbols"] = report["itinerary"]["symbols"][-2 * tail:]
            report["itinerary"]["symbols_truncated"] = True
    except NeverEntersCover:
        report["itinerary"] = None
    orbit = iterate_orbit(fmap, z0, used)
    try:
        report["omega"] = omega_limit(fmap, orbit, min(tail, len(orbit)), rho).to_json()
    except ValueError as err:
        report["omega"] = {"clusters": [], "error": str(err)}
    return report


# membership -------------------------------------------------------------------------
LIKELY_IN, LIKELY_OUT, UNDECIDED = "LikelyIn", "LikelyOut", "Undecided"


def _membership_from_snapshot(fmap, cover, snap, i, tail, rho, M):
    term = int(snap.term[i])
    if term == engine.HIT:
        return UNDECIDED
    z, zi, valid, sym = snap.z[i], snap.zi[i], snap.valid[i], snap.sym[i]
    n = int(valid.sum())
    z, zi, sym = z[valid], zi[valid], sym[valid]
    finished = term in (engine.CONVERGED, engine.OVERFLOW, engine.CYCLE)
    if finished:
        # an orbit that settled continues its limit indefinitely
        pad = 2 * tail
        if term == engine.CYCLE:
            per = next((p for p in range(2, engine.MAX_CYCLE + 1)
                        if n > p and z[-1] == z[-1 - p] and zi[-1] == zi[-1 - p]), 1)
            reps = -(-pad // per)
            z = np.concatenate([z, np.tile(z[-per:], reps)[:pad]])
            zi = np.concatenate([zi, np.tile(zi[-per:], reps)[:pad]])
            sym = np.concatenate([sym, np.tile(sym[-per:], reps)[:pad]])
        else:
            z = np.concatenate([z, np.repeat(z[-1:], pad)])
            zi = np.concatenate([zi, np.repeat(zi[-1:], pad)])
            sym = np.concatenate([sym, np.repeat(sym[-1:], pad)])
        n = z.size
    e = cover.targets[0]
    if n >= M:
        d = chordal_to(z[-M:], zi[-M:], e)
        if (sym[-M:] == 0).all() and np.all(np.diff(d) <= 0):
            return LIKELY_IN
    if n >= 2 * tail or finished:
        L = min(tail, n)
        cl = engine.cluster_tails(z[None, -L:], zi[None, -L:], np.ones((1, L), dtype=bool), rho)
        if n >= 2 * tail:
            cl2 = engine.cluster_tails(z[None, -2 * L:], zi[None, -2 * L:],
                                       np.ones((1, 2 * L), dtype=bool), rho)
            confident = _clusters_agree(cl, cl2, rho)
        else:
            confident = False
        if confident:
            # a cluster none of whose members enters the e-ball
            zs, zis, ss = z[-L:], zi[-L:], sym[-L:]
            for k in np.flatnonzero(cl.hits[0] > 0):
                c_z, c_i = cl.center[0, k], cl.center_inf[0, k]
                dist = chordal_array(zs, zis, c_z, c_i)
                members = dist <= cl.radius[0, k]
                if members.any() and not (ss[members] == 0).any():
                    return LIKELY_OUT
    return UNDECIDED


def _clusters_agree(a, b, rho):
    if a.count[0] > engine.MAX_CLUSTERS or b.count[0] > engine.MAX_CLUSTERS:
        return False
    ka = np.flatnonzero(a.hits[0] > 0)
    kb = np.flatnonzero(b.hits[0] > 0)
    if ka.size != kb.size:
        return False
    for k in ka:
        d = chordal_array(b.center[0, kb], b.center_inf[0, kb], a.center[0, k], a.center_inf[0, k])
        if not (d <= rho).any():
            return False
    return True


def membership_report(fmap, z0, e, budgets=DEFAULT_BUDGETS, radius=DEFAULT_RADIUS,
                      tail=OMEGA_TAIL, rho=OMEGA_RHO, M=MEMBERSHIP_M) -> str:
    """LikelyIn / LikelyOut / Undecided for membership of ``z0`` in I_e(f).

    LikelyIn: the last M iterates lie in the ball of e with non-increasing
    chordal distance to e.  LikelyOut: a confident omega estimate has a
    cluster that never enters the ball of e.  Budgets are tried in order
    and the first verdict other than Undecided is returned.
    """
    cover = build_cover([e], radius)
    z0 = as_point(z0)
    orb = engine.BatchOrbit(fmap, [0j if z0 is INF else z0], [z0 is INF], cover, ring=2 * tail)
    verdict = UNDECIDED
    for b in budgets:
        orb.run(b - 1)
        snap = orb.snapshot(width=2 * tail)
        verdict = _membership_from_snapshot(fmap, cover, snap, 0, tail, rho, M)
        if verdict != UNDECIDED or orb.s.term[0] != engine.RUNNING:
            break
    return verdict
