"""Expression trees over complex constants, ``z``, arithmetic and exp/sin/cos/tan.

Trees are immutable and support three interpretations:

* ``eval_array`` -- vectorized floating-point evaluation with a per-entry
  status (finite, pole, overflow, singular);
* ``series`` -- truncated Laurent series evaluation, used to resolve poles and
  the point at infinity exactly;
* ``diff`` -- symbolic differentiation (closed over the node set).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import DegenerateSeries, EssentialSingularity, Series

OMEGA = 1e300

FINITE, POLE, OVERFLOW, SINGULAR = 0, 1, 2, 3
STATUS_NAMES = {FINITE: "finite", POLE: "pole", OVERFLOW: "overflow", SINGULAR: "singular"}


class Expr:
    """Base node.  Arithmetic operators build trees."""

    precedence = 100

    def __add__(self, other):
        return Add(self, _coerce(other))

    def __radd__(self, other):
        return Add(_coerce(other), self)

    def __sub__(self, other):
        return Add(self, Neg(_coerce(other)))

    def __rsub__(self, other):
        return Add(_coerce(other), Neg(self))

    def __mul__(self, other):
        return Mul(self, _coerce(other))

    def __rmul__(self, other):
        return Mul(_coerce(other), self)

    def __truediv__(self, other):
        return Div(self, _coerce(other))

    def __rtruediv__(self, other):
        return Div(_coerce(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, n):
        if not isinstance(n, int):
            raise TypeError("only integer powers are supported")
        return Pow(self, n)

    # interpretation hooks -------------------------------------------------
    def _values(self, z):
        raise NotImplementedError

    def series(self, s: Series) -> Series:
        raise NotImplementedError

    def diff(self) -> "Expr":
        raise NotImplementedError

    def _eval(self, z):
        v, st, pole = self._values(z)
        return _finish(self, z, v, st, pole)

    def _wrap(self, child):
        s = str(child)
        return f"({s})" if child.precedence < self.precedence else s


def _coerce(x):
    return x if isinstance(x, Expr) else Const(complex(x))


def _finish(node, z, v, st, new_pole):
    """Assign statuses for this node and resolve poles through series."""
    ok = st == FINITE
    bad = ok & ~(np.abs(v) <= OMEGA)
    if new_pole is not None:
        st = np.where(bad & new_pole, POLE, st)
        bad = bad & ~new_pole
    st = np.where(bad, OVERFLOW, st)
    idx = np.flatnonzero(st == POLE)
    if idx.size:
        v = v.copy()
        for i in idx:
            v[i], st[i] = series_status(node, complex(z[i]))
    return np.where(st == FINITE, v, 0), st


def series_status(node, z0):
    """Evaluate ``node`` at a finite point through its local Laurent series."""
    try:
        s = node.series(Series.variable_at(z0))
    except EssentialSingularity:
        return 0j, SINGULAR
    except DegenerateSeries:
        return 0j, OVERFLOW
    return _series_value(s)


def series_at_infinity(node):
    """Value of ``node`` at z = infinity (via z = 1/t) with a status."""
    try:
        s = node.series(Series.variable_at_infinity())
    except EssentialSingularity:
        return 0j, SINGULAR
    except DegenerateSeries:
        return 0j, OVERFLOW
    return _series_value(s)


def _series_value(s):
    if not s.finite:
        return 0j, OVERFLOW
    val = s.value()
    if val is None:
        return 0j, POLE
    if not abs(val) <= OMEGA:
        return 0j, OVERFLOW
    return val, FINITE


def eval_array(node: Expr, z):
    """Evaluate ``node`` at every entry of a 1-d complex array."""
    z = np.ascontiguousarray(z, dtype=complex)
    with np.errstate(all="ignore"):
        return node._eval(z)


# simplifying constructors used by diff -------------------------------------
def _is_const(e, value=None):
    return isinstance(e, Const) and (value is None or e.value == value)


def add(a, b):
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return Add(a, b)


def mul(a, b):
    if _is_const(a, 0) or _is_const(b, 0):
        return Const(0j)
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    return Mul(a, b)


def neg(a):
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


# nodes ---------------------------------------------------------------------
@dataclass(frozen=True)
class Const(Expr):
    value: complex

    def _values(self, z):
        return np.full(z.shape, complex(self.value)), np.zeros(z.shape, dtype=np.int8), None

    def series(self, s):
        return Series.const(self.value)

    def diff(self):
        return Const(0j)

    def __str__(self):
        c = complex(self.value)
        if c.imag == 0:
            return f"{c.real:g}"
        if c.real == 0:
            return f"{c.imag:g}i"
        return f"({c.real:g}{c.imag:+g}i)"


@dataclass(frozen=True)
class Var(Expr):
    def _values(self, z):
        return z, np.zeros(z.shape, dtype=np.int8), None

    def series(self, s):
        return s

    def diff(self):
        return Const(1 + 0j)

    def __str__(self):
        return "z"


@dataclass(frozen=True)
class Neg(Expr):
    a: Expr
    precedence = 3

    def _values(self, z):
        v, st = self.a._eval(z)
        return -v, st, None

    def series(self, s):
        return -self.a.series(s)

    def diff(self):
        return neg(self.a.diff())

    def __str__(self):
        return f"-{self._wrap(self.a)}"


@dataclass(frozen=True)
class Add(Expr):
    a: Expr
    b: Expr
    precedence = 1

    def _values(self, z):
        va, sa = self.a._eval(z)
        vb, sb = self.b._eval(z)
        return va + vb, np.maximum(sa, sb), None

    def series(self, s):
        return self.a.series(s) + self.b.series(s)

    def diff(self):
        return add(self.a.diff(), self.b.diff())

    def __str__(self):
        return f"{self._wrap(self.a)} + {self._wrap(self.b)}"


@dataclass(frozen=True)
class Mul(Expr):
    a: Expr
    b: Expr
    precedence = 2

    def _values(self, z):
        va, sa = self.a._eval(z)
        vb, sb = self.b._eval(z)
        return va * vb, np.maximum(sa, sb), None

    def series(self, s):
        return self.a.series(s) * self.b.series(s)

    def diff(self):
        return add(mul(self.a.diff(), self.b), mul(self.a, self.b.diff()))

    def __str__(self):
        return f"{self._wrap(self.a)}*{self._wrap(self.b)}"


@dataclass(frozen=True)
class Div(Expr):
    a: Expr
    b: Expr
    precedence = 2

    def _values(self, z):
        va, sa = self.a._eval(z)
        vb, sb = self.b._eval(z)
        return va / vb, np.maximum(sa, sb), vb == 0

    def series(self, s):
        return self.a.series(s) / self.b.series(s)

    def diff(self):
        num = add(mul(self.a.diff(), self.b), neg(mul(self.a, self.b.diff())))
        if _is_const(num, 0):
            return Const(0j)
        return Div(num, Pow(self.b, 2))

    def __str__(self):
        return f"{self._wrap(self.a)}/{self.b if self.b.precedence > 2 else f'({self.b})'}"


@dataclass(frozen=True)
class Pow(Expr):
    a: Expr
    n: int
    precedence = 4

    def _values(self, z):
        va, sa = self.a._eval(z)
        pole = (va == 0) if self.n < 0 else None
        return va ** self.n, sa, pole

    def series(self, s):
        return self.a.series(s) ** self.n

    def diff(self):
        if self.n == 0:
            return Const(0j)
        inner = Const(1 + 0j) if self.n == 1 else Pow(self.a, self.n - 1)
        return mul(mul(Const(complex(self.n)), inner), self.a.diff())

    def __str__(self):
        return f"{self._wrap(self.a)}^{self.n}"


class _Unary(Expr):
    fname = ""
    func = None

    def _values(self, z):
        v, st = self.a._eval(z)
        return type(self).func(v), st, None

    def __str__(self):
        return f"{self.fname}({self.a})"


@dataclass(frozen=True)
class Exp(_Unary):
    a: Expr
    fname = "exp"
    func = staticmethod(np.exp)

    def series(self, s):
        return self.a.series(s).exp()

    def diff(self):
        return mul(self, self.a.diff())


@dataclass(frozen=True)
class Sin(_Unary):
    a: Expr
    fname = "sin"
    func = staticmethod(np.sin)

    def series(self, s):
        return self.a.series(s).sin()

    def diff(self):
        return mul(Cos(self.a), self.a.diff())


@dataclass(frozen=True)
class Cos(_Unary):
    a: Expr
    fname = "cos"
    func = staticmethod(np.cos)

    def series(self, s):
        return self.a.series(s).cos()

    def diff(self):
        return mul(neg(Sin(self.a)), self.a.diff())


@dataclass(frozen=True)
class Tan(_Unary):
    a: Expr
    fname = "tan"
    func = staticmethod(np.tan)

    def series(self, s):
        return self.a.series(s).tan()

    def diff(self):
        return mul(Pow(Cos(self.a), -2), self.a.diff())


@dataclass(frozen=True)
class Compose(Expr):
    """``outer(inner(z))``, evaluated stage by stage.

    ``outer_rule`` is B(outer); inner values within the guard distance of it
    make the composition undefined there.
    """

    outer: Expr
    inner: Expr
    outer_rule: object = None

    def _rule(self):
        from .rules import FiniteList

        return self.outer_rule if self.outer_rule is not None else FiniteList()

    def _eval(self, z):
        vi, si = self.inner._eval(z)
        v = np.zeros(z.shape, dtype=complex)
        st = si.copy()
        fin = si == FINITE
        if fin.any():
            w = vi[fin]
            hit, _ = self._rule().guard(w)
            vo, so = self.outer._eval(np.ascontiguousarray(w))
            so = np.where(hit, SINGULAR, so)
            v[fin] = np.where(hit, 0, vo)
            st[fin] = so
        at_inf = si == POLE
        if at_inf.any():
            val, status = self._outer_at_infinity()
            v[at_inf] = val
            st[at_inf] = status
        return v, st

    def _outer_at_infinity(self):
        if self._rule().has_infinity:
            return 0j, SINGULAR
        return series_at_infinity(self.outer)

    def series(self, s):
        si = self.inner.series(s)
        val = si.value()
        rule = self._rule()
        if val is None:
            if rule.has_infinity:
                raise EssentialSingularity("inner value hits infinity in B(outer)")
        else:
            hit, _ = rule.guard(np.array([val]))
            if hit[0]:
                raise EssentialSingularity("inner value hits B(outer)")
        return self.outer.series(si)

    def diff(self):
        return mul(Compose(self.outer.diff(), self.inner, self.outer_rule), self.inner.diff())

    def __str__(self):
        return f"({self.outer})∘({self.inner})"


def free_z():
    return Var()


def exp(e):
    return Exp(_coerce(e))


def sin(e):
    return Sin(_coerce(e))


def cos(e):
    return Cos(_coerce(e))


def tan(e):
    return Tan(_coerce(e))
