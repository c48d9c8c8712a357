"""Guarded evaluation of catalogued maps on the Riemann sphere."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from . import expr as ex
from .rules import (EPS_SING, FiniteList, Preimage, SingularityRule, Union,
                    WithInfinity)
from .series import DegenerateSeries, EssentialSingularity, Series
from .sphere import INF, SpherePoint, as_point, chordal_distance

__all__ = [
    "MapSpec", "Finite", "AtInfinity", "UndefinedSingular", "OverflowedToInfinity",
    "evaluate", "derivative", "chart_derivative", "compose_maps", "evaluate_batch",
    "evaluate_point", "chordal_distance", "class_tag_count",
]

_TAG_RE = re.compile(r"^(E|P1|P2|M|Kinf|K\?|K\d+)$")


def class_tag_count(tag: str):
    """Number of elements of B(f) implied by a class tag (None if unknown/infinite)."""
    if tag in ("E", "P1", "M"):
        return 1
    if tag == "P2":
        return 2
    if tag in ("Kinf", "K?"):
        return None
    return int(tag[1:])


def _exact_finite_count(rule):
    """Cardinality of B(f) for rules built from finite lists only, else None."""
    if isinstance(rule, WithInfinity):
        inner = _exact_finite_count(rule.inner)
        return None if inner is None else inner + 1
    if isinstance(rule, FiniteList):
        return len(rule.points)
    return None


@dataclass(frozen=True, eq=False)
class MapSpec:
    label: str
    expression: ex.Expr
    singularity_rule: SingularityRule
    class_tag: str
    declared_singular_values: Tuple[SpherePoint, ...] = ()
    params: Tuple[Tuple[str, complex], ...] = ()
    # f(z) - z - shift when the map is a perturbed translation; lets callers
    # measure the displacement without cancellation against z
    displacement: Optional[ex.Expr] = None
    shift: complex = 0j
    iterate_of: Optional[Tuple["MapSpec", int]] = None
    description: str = ""

    def __post_init__(self):
        if not _TAG_RE.match(self.class_tag):
            raise ValueError(f"unknown class tag {self.class_tag!r}")
        rule = self.singularity_rule
        # composed rules cannot be counted exactly; their tag comes from the class table
        count = _exact_finite_count(rule)
        if self.class_tag in ("E", "P1", "M"):
            ok = count in (None, 1) and rule.has_infinity
        elif self.class_tag == "P2":
            ok = (isinstance(rule, WithInfinity) and isinstance(rule.inner, FiniteList)
                  and [complex(p) for p in rule.inner.points] == [0j])
            ok = ok or (count is None and rule.has_infinity)
        elif self.class_tag == "Kinf":
            ok = not rule.is_finite_set()
        elif self.class_tag == "K?":
            ok = True
        else:
            n = _exact_finite_count(rule)
            ok = n is None or n == class_tag_count(self.class_tag)
        if not ok:
            raise ValueError(f"class tag {self.class_tag} inconsistent with rule {rule}")

    @cached_property
    def derivative_tree(self) -> ex.Expr:
        return self.expression.diff()

    @cached_property
    def second_derivative_tree(self) -> ex.Expr:
        return self.derivative_tree.diff()

    @property
    def param_dict(self):
        return dict(self.params)

    @property
    def infinity_singular(self) -> bool:
        return self.singularity_rule.has_infinity

    @property
    def base_map(self) -> "MapSpec":
        return self.iterate_of[0] if self.iterate_of else self

    @property
    def iterate_count(self) -> int:
        return self.iterate_of[1] if self.iterate_of else 1

    def __repr__(self):
        return f"MapSpec({self.label!r}: {self.expression}, class {self.class_tag})"


# evaluation results --------------------------------------------------------
@dataclass(frozen=True)
class Finite:
    value: complex

    @property
    def point(self):
        return self.value


@dataclass(frozen=True)
class AtInfinity:
    @property
    def point(self):
        return INF


@dataclass(frozen=True)
class UndefinedSingular:
    singularity: SpherePoint

    @property
    def point(self):
        return None


@dataclass(frozen=True)
class OverflowedToInfinity:
    @property
    def point(self):
        return INF


def evaluate_batch(fmap: MapSpec, z, tree: Optional[ex.Expr] = None):
    """Vectorized evaluation at finite points: ``(values, status codes)``.

    Status codes are those of :mod:`essdyn.expr`. Values are zero wherever
    the status is not finite.
    """
    z = np.ascontiguousarray(z, dtype=complex).ravel()
    tree = fmap.expression if tree is None else tree
    hit, _ = fmap.singularity_rule.guard(z)
    v, st = ex.eval_array(tree, z)
    st = np.where(hit, ex.SINGULAR, st)
    return np.where(hit, 0, v), st


def evaluate_point(fmap: MapSpec, z: SpherePoint, tree: Optional[ex.Expr] = None):
    """Scalar evaluation returning ``(value, status name)``."""
    tree = fmap.expression if tree is None else tree
    if z is INF:
        if fmap.infinity_singular:
            return 0j, "singular"
        val, st = ex.series_at_infinity(tree)
        return val, ex.STATUS_NAMES[st]
    v, st = evaluate_batch(fmap, np.array([complex(z)]), tree)
    return complex(v[0]), ex.STATUS_NAMES[int(st[0])]


def _nearest_singularity(fmap: MapSpec, z: SpherePoint):
    if z is INF:
        return INF
    d, where = fmap.singularity_rule.nearest(np.array([complex(z)]))
    if d[0] <= EPS_SING * max(1.0, abs(where[0])):
        return complex(where[0])
    # undefined at an inner stage of a composition: z itself is the
    # numerically located pre-image in B(f o g)
    return complex(z)


def _as_result(fmap, z, val, status):
    if status == "finite":
        return Finite(val)
    if status == "pole":
        return AtInfinity()
    if status == "overflow":
        return OverflowedToInfinity()
    return UndefinedSingular(_nearest_singularity(fmap, z))


def evaluate(fmap: MapSpec, z) -> object:
    """Evaluate ``fmap`` at a sphere point.

    Returns one of :class:`Finite`, :class:`AtInfinity`,
    :class:`UndefinedSingular` or :class:`OverflowedToInfinity`.
    """
    z = as_point(z)
    val, status = evaluate_point(fmap, z)
    return _as_result(fmap, z, val, status)


def _local_series(tree, z):
    s = Series.variable_at_infinity() if z is INF else Series.variable_at(complex(z))
    return tree.series(s)


def chart_derivative(fmap: MapSpec, z: SpherePoint) -> complex:
    """Derivative of ``fmap`` at ``z`` in the sphere charts w = 1/z near infinity.

    At a finite point with finite image this is f'(z); at a pole it is
    (1/f)'(z); at infinity it is the derivative of 1/f(1/w) (or of f(1/w)
    when f(inf) is finite) at w = 0.
    """
    z = as_point(z)
    val, status = evaluate_point(fmap, z)
    if status == "singular":
        raise EssentialSingularity(f"{fmap.label} is undefined at {z}")
    if status == "overflow":
        raise ArithmeticError(f"{fmap.label} overflows at {z}")
    if z is not INF and status == "finite":
        d = derivative(fmap, z)
        if isinstance(d, Finite):
            return d.value
        raise ArithmeticError(f"derivative of {fmap.label} undefined at {z}")
    try:
        s = _local_series(fmap.expression, z)
        if status == "pole":
            s = s.reciprocal()
    except (EssentialSingularity, DegenerateSeries) as err:
        raise ArithmeticError(str(err)) from err
    return s.coeff(1)


def derivative(fmap: MapSpec, z) -> object:
    """Value of the symbolic derivative at ``z`` (chart convention at infinity)."""
    z = as_point(z)
    if z is INF:
        val, status = evaluate_point(fmap, INF)
        if status != "finite" and status != "pole":
            return _as_result(fmap, z, val, status)
        return Finite(chart_derivative(fmap, INF))
    val, status = evaluate_point(fmap, z, fmap.derivative_tree)
    if status == "singular":
        return UndefinedSingular(_nearest_singularity(fmap, z))
    return _as_result(fmap, z, val, status)


# composition ---------------------------------------------------------------
def _iterate_tag(base: MapSpec, n: int) -> str:
    from .singlab import Count, CountInfinite, composition_class_count

    res = composition_class_count(base.class_tag, n)
    if isinstance(res, Count):
        if res.n == 1 and base.class_tag == "E":
            return "E"
        if res.n == 2 and base.class_tag == "P2":
            return "P2"
        return f"K{res.n}"
    if isinstance(res, CountInfinite):
        return "Kinf"
    return "K?"


def _composite_tag(outer: MapSpec, inner: MapSpec, iterate_of) -> str:
    if iterate_of is not None:
        return _iterate_tag(*iterate_of)
    if outer.class_tag == "E" and inner.class_tag == "E":
        return "E"
    if class_tag_count(outer.class_tag) == 0:
        n = class_tag_count(inner.class_tag)
        return "Kinf" if n is None and inner.class_tag == "Kinf" else (f"K{n}" if n is not None else "K?")
    if class_tag_count(inner.class_tag) == 0 and _exact_finite_count(outer.singularity_rule) is not None:
        from .rules import Window
        from .singlab import preimage_points

        from .rules import dedupe_points

        # nested windows so that grid spacing stays small near the origin
        pts = dedupe_points(p for r in (4.0, 40.0, 400.0)
                            for p in preimage_points(inner, outer.singularity_rule,
                                                     Window(-r, r, -r, r)))
        n = len(pts)
        if Preimage(outer.singularity_rule, inner).has_infinity:
            n += 1
        return f"K{n}"
    return "K?"


def compose_maps(outer: MapSpec, inner: MapSpec, label: Optional[str] = None) -> MapSpec:
    """The composition ``outer o inner`` with B = B(inner) u inner^{-1}(B(outer))."""
    iterate_of = None
    if outer.base_map is inner.base_map and outer.iterate_of is None:
        iterate_of = (outer, inner.iterate_count + 1)
    rule = Union((inner.singularity_rule, Preimage(outer.singularity_rule, inner)))
    tree = ex.Compose(outer.expression, inner.expression, outer.singularity_rule)
    if label is None:
        label = f"{outer.label}^{iterate_of[1]}" if iterate_of else f"{outer.label}∘{inner.label}"
    return MapSpec(
        label=label,
        expression=tree,
        singularity_rule=rule,
        class_tag=_composite_tag(outer, inner, iterate_of),
        params=inner.params if iterate_of else (),
        iterate_of=iterate_of,
        description=f"composition {outer.label} o {inner.label}",
    )


def iterate_map(fmap: MapSpec, n: int) -> MapSpec:
    """The n-fold composition of ``fmap`` with itself (n >= 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = fmap
    for _ in range(n - 1):
        out = compose_maps(fmap, out)
    return out
