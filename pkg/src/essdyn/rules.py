"""Singularity sets B(f) described by rules that can be queried per window."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .sphere import INF

# Inputs this close (times max(1, |e|)) to an element e of B(f) are undefined.
EPS_SING = 1e-12


@dataclass(frozen=True)
class Window:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        vals = (self.re_min, self.re_max, self.im_min, self.im_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("window bounds must be finite")
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError(f"degenerate window {vals}")

    @classmethod
    def parse(cls, text: str) -> "Window":
        """Parse ``"re_min,re_max,im_min,im_max"``."""
        parts = [float(p) for p in text.replace(" ", "").split(",")]
        if len(parts) != 4:
            raise ValueError(f"window needs 4 numbers, got {text!r}")
        return cls(*parts)

    @classmethod
    def around(cls, z: complex, radius: float) -> "Window":
        return cls(z.real - radius, z.real + radius, z.imag - radius, z.imag + radius)

    def contains(self, z) -> bool:
        if z is INF:
            return False
        return (self.re_min <= z.real <= self.re_max
                and self.im_min <= z.imag <= self.im_max)

    def contains_array(self, z):
        return ((z.real >= self.re_min) & (z.real <= self.re_max)
                & (z.imag >= self.im_min) & (z.imag <= self.im_max))

    def grid(self, nx: int, ny: int):
        xs = np.linspace(self.re_min, self.re_max, nx)
        ys = np.linspace(self.im_min, self.im_max, ny)
        return (xs[None, :] + 1j * ys[:, None]).ravel()

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    def to_json(self):
        return [self.re_min, self.re_max, self.im_min, self.im_max]


def _guard_tol(points):
    return EPS_SING * np.maximum(1.0, np.abs(points))


class SingularityRule:
    """Base class. Subclasses describe B(f) exactly or lazily."""

    has_infinity = False
    exact = True

    def points_in_window(self, window: Window):
        raise NotImplementedError

    def nearest(self, z):
        """Distance to, and location of, the nearest exactly-known finite point."""
        z = np.asarray(z, dtype=complex)
        return np.full(z.shape, np.inf), np.zeros(z.shape, dtype=complex)

    def guard(self, z):
        """Mask of inputs within the singularity guard, and the nearest points."""
        dist, where = self.nearest(z)
        return dist <= _guard_tol(where), where

    def is_finite_set(self) -> bool:
        return True

    def to_json(self):
        raise NotImplementedError


@dataclass(frozen=True)
class FiniteList(SingularityRule):
    points: Tuple[complex, ...] = ()

    def points_in_window(self, window):
        return [complex(p) for p in self.points if window.contains(complex(p))]

    def nearest(self, z):
        z = np.asarray(z, dtype=complex)
        if not self.points:
            return super().nearest(z)
        pts = np.asarray(self.points, dtype=complex)
        d = np.abs(z[..., None] - pts)
        k = np.argmin(d, axis=-1)
        return np.take_along_axis(d, k[..., None], -1)[..., 0], pts[k]

    def to_json(self):
        return {"kind": "finite", "points": [[p.real, p.imag] for p in map(complex, self.points)]}


@dataclass(frozen=True)
class Lattice(SingularityRule):
    """The points ``base + k*step`` for all integers k (accumulating at infinity)."""

    base: complex = 0j
    step: complex = math.pi

    def points_in_window(self, window):
        corners = np.array([complex(window.re_min, window.im_min), complex(window.re_min, window.im_max),
                            complex(window.re_max, window.im_min), complex(window.re_max, window.im_max)])
        s = ((corners - self.base) / self.step).real
        lo, hi = math.floor(s.min()) - 1, math.ceil(s.max()) + 1
        pts = [self.base + k * self.step for k in range(lo, hi + 1)]
        return [complex(p) for p in pts if window.contains(complex(p))]

    def nearest(self, z):
        z = np.asarray(z, dtype=complex)
        k = np.round(((z - self.base) / self.step).real)
        where = self.base + k * self.step
        return np.abs(z - where), where

    def is_finite_set(self):
        return False

    def to_json(self):
        return {"kind": "lattice", "base": [self.base.real, self.base.imag],
                "step": [complex(self.step).real, complex(self.step).imag]}


@dataclass(frozen=True)
class WithInfinity(SingularityRule):
    inner: SingularityRule = FiniteList()
    has_infinity = True

    def points_in_window(self, window):
        return self.inner.points_in_window(window)

    def nearest(self, z):
        return self.inner.nearest(z)

    def is_finite_set(self):
        return self.inner.is_finite_set()

    @property
    def exact(self):
        return self.inner.exact

    def to_json(self):
        return {"kind": "with_infinity", "inner": self.inner.to_json()}


@dataclass(frozen=True)
class Union(SingularityRule):
    rules: Tuple[SingularityRule, ...] = ()

    @property
    def has_infinity(self):
        return any(r.has_infinity for r in self.rules)

    @property
    def exact(self):
        return all(r.exact for r in self.rules)

    def points_in_window(self, window):
        pts = []
        for r in self.rules:
            pts.extend(r.points_in_window(window))
        return dedupe_points(pts)

    def nearest(self, z):
        z = np.asarray(z, dtype=complex)
        best_d = np.full(z.shape, np.inf)
        best_p = np.zeros(z.shape, dtype=complex)
        for r in self.rules:
            d, p = r.nearest(z)
            better = d < best_d
            best_d = np.where(better, d, best_d)
            best_p = np.where(better, p, best_p)
        return best_d, best_p

    def is_finite_set(self):
        return all(r.is_finite_set() for r in self.rules)

    def to_json(self):
        return {"kind": "union", "rules": [r.to_json() for r in self.rules]}


@dataclass(frozen=True)
class Preimage(SingularityRule):
    """``inner^{-1}(B(outer))``, resolved numerically per window.

    ``nearest`` reports nothing: evaluation of a composition guards the outer
    stage on the inner value instead.
    """

    outer_rule: SingularityRule = FiniteList()
    inner: object = None  # MapSpec; untyped to avoid an import cycle
    exact = False

    @property
    def has_infinity(self):
        from .kernel import evaluate_point

        if self.inner.singularity_rule.has_infinity:
            return False  # already part of the inner rule
        fz, status = evaluate_point(self.inner, INF)
        if status == "pole":
            return self.outer_rule.has_infinity
        if status != "finite":
            return False
        d, _ = self.outer_rule.nearest(np.array([fz]))
        return bool(d[0] <= EPS_SING * max(1.0, abs(fz)))

    def points_in_window(self, window):
        from .singlab import preimage_points

        return preimage_points(self.inner, self.outer_rule, window)

    def is_finite_set(self):
        return False

    def to_json(self):
        return {"kind": "preimage", "outer": self.outer_rule.to_json(), "inner": self.inner.label}


def dedupe_points(points, tol=1e-9):
    """Sort canonically (real, then imaginary part) and merge points within ``tol``."""
    pts = sorted((complex(p) for p in points), key=lambda p: (p.real, p.imag))
    out = []
    for p in pts:
        dup = False
        for q in reversed(out):
            if q.real < p.real - tol:
                break
            if abs(p - q) <= tol:
                dup = True
                break
        if not dup:
            out.append(p)
    return out


def rule_from_json(obj) -> SingularityRule:
    kind = obj["kind"]
    if kind == "finite":
        return FiniteList(tuple(complex(a, b) for a, b in obj["points"]))
    if kind == "lattice":
        return Lattice(complex(*obj["base"]), complex(*obj["step"]))
    if kind == "with_infinity":
        return WithInfinity(rule_from_json(obj["inner"]))
    if kind == "union":
        return Union(tuple(rule_from_json(r) for r in obj["rules"]))
    raise ValueError(f"cannot rebuild rule of kind {kind!r} from JSON")
