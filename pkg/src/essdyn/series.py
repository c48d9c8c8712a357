"""Truncated Laurent series in a local parameter ``t``.

Used to evaluate expression trees exactly at poles and at infinity, where the
plain floating-point path produces ``inf``/``nan``.  A series stores ``ORDER``
coefficients starting at ``t**valuation``.
"""

from __future__ import annotations

import numpy as np

ORDER = 14
_TRIM = 1e-13


class EssentialSingularity(ArithmeticError):
    """A transcendental function was applied to a series with a pole."""


class DegenerateSeries(ArithmeticError):
    """Division by a series whose retained coefficients all vanish."""


class Series:
    __slots__ = ("val", "c")

    def __init__(self, val, coeffs):
        c = np.zeros(ORDER, dtype=complex)
        coeffs = np.asarray(coeffs, dtype=complex)[:ORDER]
        c[: len(coeffs)] = coeffs
        self.val = int(val)
        self.c = c
        self._normalize()

    def _normalize(self):
        scale = np.max(np.abs(self.c)) if self.c.size else 0.0
        if not np.isfinite(scale):
            return
        if scale == 0.0:
            self.val = 0
            return
        lead = 0
        while lead < ORDER and abs(self.c[lead]) <= _TRIM * scale:
            lead += 1
        if lead:
            self.c = np.concatenate([self.c[lead:], np.zeros(lead, dtype=complex)])
            self.val += lead

    @classmethod
    def const(cls, a):
        return cls(0, [a])

    @classmethod
    def variable_at(cls, z0):
        """The identity ``z = z0 + t``."""
        return cls(0, [z0, 1.0])

    @classmethod
    def variable_at_infinity(cls):
        """The identity ``z = 1/t``."""
        return cls(-1, [1.0])

    @property
    def is_zero(self):
        return not np.any(self.c)

    @property
    def finite(self):
        return bool(np.all(np.isfinite(self.c)))

    def coeff(self, k):
        """Coefficient of ``t**k``."""
        i = k - self.val
        if 0 <= i < ORDER:
            return complex(self.c[i])
        return 0j

    def _dense(self):
        # ordinary power series t^0..t^(ORDER-1); requires val >= 0
        out = np.zeros(ORDER, dtype=complex)
        if self.val < ORDER:
            n = ORDER - self.val
            out[self.val:] = self.c[:n]
        return out

    def __neg__(self):
        return Series(self.val, -self.c)

    def __add__(self, other):
        if not isinstance(other, Series):
            other = Series.const(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        v = min(self.val, other.val)
        out = np.zeros(ORDER, dtype=complex)
        for s in (self, other):
            off = s.val - v
            if off < ORDER:
                out[off:] += s.c[: ORDER - off]
        return Series(v, out)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Series):
            other = Series.const(other)
        prod = np.convolve(self.c, other.c)[:ORDER]
        return Series(self.val + other.val, prod)

    def reciprocal(self):
        if self.is_zero or not self.finite:
            raise DegenerateSeries("reciprocal of a vanishing series")
        a = self.c
        b = np.zeros(ORDER, dtype=complex)
        b[0] = 1.0 / a[0]
        for n in range(1, ORDER):
            b[n] = -np.dot(a[1 : n + 1], b[n - 1 :: -1][:n]) / a[0]
        return Series(-self.val, b)

    def __truediv__(self, other):
        if not isinstance(other, Series):
            other = Series.const(other)
        return self * other.reciprocal()

    def __pow__(self, n: int):
        if n == 0:
            return Series.const(1.0)
        if n < 0:
            return (self ** (-n)).reciprocal()
        result = Series.const(1.0)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def exp(self):
        if self.val < 0:
            raise EssentialSingularity("exp of a pole")
        d = self._dense()
        a0, d[0] = d[0], 0.0
        b = np.zeros(ORDER, dtype=complex)
        b[0] = 1.0
        k = np.arange(ORDER)
        for n in range(1, ORDER):
            b[n] = np.dot(k[1 : n + 1] * d[1 : n + 1], b[n - 1 :: -1][:n]) / n
        return Series(0, np.exp(a0) * b)

    def sin(self):
        e1 = (self * 1j).exp()
        e2 = (self * -1j).exp()
        return (e1 - e2) * (-0.5j)

    def cos(self):
        e1 = (self * 1j).exp()
        e2 = (self * -1j).exp()
        return (e1 + e2) * 0.5

    def tan(self):
        return self.sin() / self.cos()

    def value(self):
        """Value at ``t = 0``: a complex number, or ``None`` for a pole."""
        if self.val < 0 and not self.is_zero:
            return None
        return self.coeff(0)

    def __repr__(self):
        return f"Series(val={self.val}, c={self.c[:4]}...)"
