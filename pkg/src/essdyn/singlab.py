"""Singularity sets of iterates, pre-singularity trees and the composition-class table."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import newton
from .rules import Window, dedupe_points
from .sphere import INF, as_point, point_to_json

__all__ = [
    "singularities_in_window", "preimage_points", "presingularities", "PreSingularityTree",
    "Count", "CountInfinite", "Indeterminate", "composition_class_count", "critical_points",
]

# Pre-image searches of lattice rules would otherwise enumerate every target
# reachable from the window image.
MAX_TARGETS = 32
_TARGET_BOX = 1e6


def singularities_in_window(fmap, window: Window, sphere: bool = False):
    """B(f) inside ``window``, sorted canonically; with ``sphere`` also INF if it belongs."""
    pts = sorted(fmap.singularity_rule.points_in_window(window), key=lambda p: (p.real, p.imag))
    if sphere and fmap.singularity_rule.has_infinity:
        pts.append(INF)
    return pts


def _targets_for(inner, outer_rule, window, grid):
    """Finite outer singularities that the inner map can reach from ``window``."""
    from .kernel import evaluate_batch

    vals, st = evaluate_batch(inner, window.grid(grid, grid))
    vals = vals[(st == 0) & (np.abs(vals) < _TARGET_BOX)]
    if vals.size == 0:
        return []
    box = Window(vals.real.min() - 1, vals.real.max() + 1, vals.imag.min() - 1, vals.imag.max() + 1)
    pts = outer_rule.points_in_window(box)
    if len(pts) > MAX_TARGETS:
        c = window.center
        pts = sorted(pts, key=lambda p: (abs(p - c), p.real, p.imag))[:MAX_TARGETS]
    return pts


def preimage_points(inner, outer_rule, window: Window, grid: int = newton.GRID):
    """Numeric points of inner^{-1}(B(outer)) inside ``window``."""
    found = []
    if outer_rule.has_infinity:
        found.extend(newton.solve(inner, window, INF, grid).roots)
    for t in _targets_for(inner, outer_rule, window, grid):
        found.extend(newton.solve(inner, window, t, grid).roots)
    return dedupe_points(found)


@dataclass
class PreSingularityTree:
    root: object
    window: Window
    depth: int
    levels: List[list]
    failures: List[int] = field(default_factory=list)
    truncated: List[bool] = field(default_factory=list)

    def all_points(self):
        return dedupe_points(p for lvl in self.levels[1:] for p in lvl)

    def contains(self, z, tol=1e-9, levels=None):
        rng = range(1, len(self.levels)) if levels is None else levels
        return any(abs(p - z) <= tol for j in rng for p in self.levels[j] if p is not INF)

    def to_json(self):
        return {
            "root": point_to_json(self.root),
            "window": self.window.to_json(),
            "depth": self.depth,
            "levels": [[point_to_json(p) for p in lvl] for lvl in self.levels],
            "failures": list(self.failures),
            "truncated": list(self.truncated),
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2)


def presingularities(fmap, e, depth: int, window: Window, grid: int = newton.GRID,
                     max_targets: int = MAX_TARGETS) -> PreSingularityTree:
    """Levels ``f^{-j}(e)`` for j = 0..depth inside ``window``.

    Level j is obtained by Newton on f(p) = q for every q of level j-1.
    When a level exceeds ``max_targets`` points only the ones nearest the
    window centre seed the next level (recorded in ``truncated``).
    """
    e = as_point(e)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if e is INF:
        if not fmap.singularity_rule.has_infinity:
            raise ValueError(f"inf is not in B({fmap.label})")
    else:
        hit, _ = fmap.singularity_rule.guard(np.array([complex(e)]))
        if not hit[0]:
            raise ValueError(f"{e} is not in B({fmap.label})")
    levels = [[e]]
    failures = [0]
    truncated = [False]
    c = window.center
    for _ in range(depth):
        targets = levels[-1]
        cut = len(targets) > max_targets
        if cut:
            targets = sorted(targets, key=lambda p: (abs(p - c), p.real, p.imag))[:max_targets]
        found, failed = [], 0
        for t in targets:
            out = newton.solve(fmap, window, t, grid)
            found.extend(out.roots)
            failed += out.failed
        levels.append(dedupe_points(found))
        failures.append(failed)
        truncated.append(cut)
    return PreSingularityTree(e, window, depth, levels, failures, truncated)


# composition-class arithmetic ----------------------------------------------
@dataclass(frozen=True)
class Count:
    n: int

    def __str__(self):
        return str(self.n)


@dataclass(frozen=True)
class CountInfinite:
    def __str__(self):
        return "infinite"


@dataclass(frozen=True)
class Indeterminate:
    """The case table does not fix the count (M at n = 2, K1 beyond n = 1)."""

    def __str__(self):
        return "indeterminate"


def composition_class_count(class_tag: str, n: int):
    """Cardinality of B(f^n) for a map of the given class."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if class_tag == "E":
        return Count(1)
    if class_tag == "P1":
        return Count(1) if n == 1 else Count(2)
    if class_tag == "P2":
        return Count(2)
    if class_tag == "M":
        if n == 1:
            return Count(1)
        return Indeterminate() if n == 2 else CountInfinite()
    if class_tag == "Kinf":
        return CountInfinite()
    if class_tag == "K?":
        return Indeterminate()
    if not (class_tag.startswith("K") and class_tag[1:].isdigit()):
        raise ValueError(f"unknown class tag {class_tag!r}")
    m = int(class_tag[1:])
    if m == 0:
        return Count(0)
    if n == 1:
        return Count(m)
    if m == 1:
        return Indeterminate()
    if m == 2:
        return Indeterminate() if n == 2 else CountInfinite()
    return CountInfinite()


def critical_points(fmap, window: Window, grid: int = newton.GRID):
    """Zeros of f' in ``window`` (Newton on f' with f'' as its derivative)."""
    out = newton.solve(fmap, window, 0j, grid, fmap.derivative_tree, fmap.second_derivative_tree)
    return out.roots
