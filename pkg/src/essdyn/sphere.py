"""Points of the Riemann sphere and the chordal metric.

Finite points are plain Python ``complex`` values; the point at infinity is
the singleton :data:`INF`.
"""

from __future__ import annotations

import math
from typing import Union

import numpy as np


class _Infinity:
    """The point at infinity on the Riemann sphere (singleton)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (_Infinity, ())

    def __hash__(self):
        return hash("essdyn.INF")


INF = _Infinity()

SpherePoint = Union[complex, _Infinity]


def is_inf(p) -> bool:
    return p is INF


def as_point(p) -> SpherePoint:
    """Coerce ``p`` to a sphere point.

    Accepts numbers, ``[re, im]`` pairs, the string ``"inf"`` and :data:`INF`.
    Infinite coordinates map to :data:`INF`; NaN coordinates are rejected.
    """
    if p is INF:
        return INF
    if isinstance(p, str):
        s = p.strip().lower()
        if s in ("inf", "infinity", "oo", "∞"):
            return INF
        return as_point(complex(s.replace(" ", "").replace("i", "j")))
    if isinstance(p, (list, tuple)):
        if len(p) != 2:
            raise ValueError(f"expected [re, im], got {p!r}")
        if any(isinstance(c, str) for c in p):
            if all(str(c).lower() == "inf" for c in p):
                return INF
            raise ValueError(f"bad point {p!r}")
        p = complex(float(p[0]), float(p[1]))
    z = complex(p)
    if math.isnan(z.real) or math.isnan(z.imag):
        raise ValueError("sphere points cannot have NaN coordinates")
    if math.isinf(z.real) or math.isinf(z.imag):
        return INF
    return z


def point_to_json(p: SpherePoint):
    if p is INF:
        return "inf"
    return [p.real, p.imag]


def point_from_json(obj) -> SpherePoint:
    return as_point(obj)


def chordal_distance(p: SpherePoint, q: SpherePoint) -> float:
    """Chordal distance on the unit-diameter-2 sphere; values lie in [0, 2]."""
    if p is INF and q is INF:
        return 0.0
    if p is INF:
        p, q = q, p
    if q is INF:
        return 2.0 / math.hypot(1.0, abs(p))
    if p == q:
        return 0.0
    d = 2.0 * abs(p - q) / (math.hypot(1.0, abs(p)) * math.hypot(1.0, abs(q)))
    return min(d, 2.0)


def chordal_array(z, z_inf, w, w_inf):
    """Elementwise chordal distance between two batches of sphere points.

    ``z_inf``/``w_inf`` are boolean masks marking entries at infinity; the
    complex entries there are ignored.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    z_inf = np.asarray(z_inf, dtype=bool)
    w_inf = np.asarray(w_inf, dtype=bool)
    zany, wany = z_inf.any(), w_inf.any()
    zs = np.where(z_inf, 0, z) if zany else z
    ws = np.where(w_inf, 0, w) if wany else w
    with np.errstate(all="ignore"):
        hz = np.hypot(1.0, np.abs(zs))
        hw = np.hypot(1.0, np.abs(ws))
        both = np.minimum(2.0 * np.abs(zs - ws) / (hz * hw), 2.0)
    if not (zany or wany):
        return both
    out = np.where(z_inf & w_inf, 0.0, both)
    out = np.where(z_inf & ~w_inf, 2.0 / hw, out)
    out = np.where(w_inf & ~z_inf, 2.0 / hz, out)
    return out


def chordal_to(z, z_inf, target: SpherePoint):
    """Chordal distance from every entry of a batch to one sphere point."""
    z = np.asarray(z, dtype=complex)
    if target is INF:
        return chordal_array(z, z_inf, 0j, True)
    return chordal_array(z, z_inf, complex(target), False)


def point_key(p: SpherePoint):
    """Hashable, exact identity key for a sphere point."""
    return "inf" if p is INF else (float(p.real), float(p.imag))


def format_point(p: SpherePoint) -> str:
    if p is INF:
        return "inf"
    return f"{p.real:.12g}{p.imag:+.12g}i"
