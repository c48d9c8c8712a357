"""Built-in maps of class K, looked up by label."""

from __future__ import annotations

import cmath
import math

from . import expr as ex
from .kernel import MapSpec
from .rules import FiniteList, Lattice, WithInfinity
from .sphere import INF

__all__ = ["builtin_catalog", "get_map", "map_labels", "UnknownMap"]

z = ex.free_z()
ONLY_INF = WithInfinity(FiniteList())
INF_AND_ZERO = WithInfinity(FiniteList((0j,)))


class UnknownMap(KeyError):
    pass


def _c(x):
    return complex(x)


def _exp_lambda(lam=1.0):
    lam = _c(lam)
    return MapSpec("exp_lambda", lam * ex.exp(z), ONLY_INF, "E", (0j,),
                   (("lam", lam),), description="lam*exp(z)")


def _exp():
    return MapSpec("exp", ex.exp(z), ONLY_INF, "E", (0j,), description="exp(z)")


def _sin_lambda(lam=1.0):
    lam = _c(lam)
    return MapSpec("sin_lambda", lam * ex.sin(z), ONLY_INF, "E", (-lam, lam),
                   (("lam", lam),), description="lam*sin(z)")


def _tan_lambda(lam=1.0):
    lam = _c(lam)
    return MapSpec("tan_lambda", lam * ex.tan(z), ONLY_INF, "M", (1j * lam, -1j * lam),
                   (("lam", lam),), description="lam*tan(z)")


def _exp_over_z(lam=1.0):
    lam = _c(lam)
    return MapSpec("exp_over_z", lam * ex.exp(z) / z, ONLY_INF, "P1", (0j, lam * math.e),
                   (("lam", lam),), description="lam*exp(z)/z")


def _exp_alpha(alpha=0.25):
    alpha = _c(alpha)
    sv = (0j, INF, cmath.exp(2j * alpha), cmath.exp(-2j * alpha))
    return MapSpec("exp_alpha", ex.exp(alpha * (z - 1 / z)), INF_AND_ZERO, "P2", sv,
                   (("alpha", alpha),), description="exp(alpha*(z - 1/z))")


def _exp_plus_pole(lam=1.0, mu=1.0):
    lam, mu = _c(lam), _c(mu)
    return MapSpec("exp_plus_pole", lam * ex.exp(z) + mu / z, ONLY_INF, "M", (0j,),
                   (("lam", lam), ("mu", mu)), description="lam*exp(z) + mu/z")


def _exp_inv_tan():
    return MapSpec("exp_inv_tan", ex.exp(1 / z) * ex.tan(z), INF_AND_ZERO, "K2", (),
                   description="exp(1/z)*tan(z)")


def _fatou():
    return MapSpec("fatou", ex.exp(-z) + z + 1, ONLY_INF, "E", (INF,),
                   description="exp(-z) + z + 1")


def _h():
    return MapSpec("h", -ex.exp(z) + 1 / z, ONLY_INF, "M", (0j,),
                   description="-exp(z) + 1/z")


def _g():
    disp = ex.exp(1 / ex.sin(z))
    return MapSpec("g", disp + z, WithInfinity(Lattice(0j, math.pi)), "Kinf", (INF,),
                   displacement=disp, description="exp(1/sin z) + z")


def _f():
    disp = ex.exp(1 / ex.sin(z))
    return MapSpec("f", disp + z + 2 * math.pi, WithInfinity(Lattice(0j, math.pi)), "Kinf",
                   (INF,), displacement=disp, shift=2 * math.pi,
                   description="exp(1/sin z) + z + 2*pi")


def _f_n(n=3):
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    roots = tuple(cmath.exp(2j * math.pi * k / n) for k in range(n))
    roots = tuple(complex(round(r.real, 15), round(r.imag, 15)) for r in roots)
    coef = cmath.exp(2j * math.pi / n) / n
    return MapSpec("f_n", ex.exp(1 / (z ** n - 1)) + coef * z, FiniteList(roots), f"K{n}", (),
                   (("n", n),), description="exp(1/(z^n - 1)) + (1/n) exp(2 pi i/n) z")


def _lambda_z_exp(lam=0.5):
    lam = _c(lam)
    return MapSpec("lambda_z_exp", lam * z * ex.exp(z), ONLY_INF, "E", (0j, -lam / math.e),
                   (("lam", lam),), description="lam*z*exp(z)")


def _zsq_over_zm1():
    return MapSpec("zsq_over_zm1", z ** 2 / (z - 1), FiniteList(), "K0",
                   description="z^2/(z - 1)")


def _identity():
    return MapSpec("identity", z + 0, FiniteList(), "K0", description="z + 0")


def _exp_inv_plus_pole():
    return MapSpec("exp_inv_plus_pole", ex.exp(1 / z) + 1 / (z - 1), FiniteList((0j,)), "K1",
                   description="exp(1/z) + 1/(z - 1)")


def _sin_plus_pole(lam=1.0, eps=0.1, p=0.0):
    lam, eps, p = _c(lam), _c(eps), _c(p)
    return MapSpec("sin_plus_pole", lam * ex.sin(z) + eps / (z - p), ONLY_INF, "M", (),
                   (("lam", lam), ("eps", eps), ("p", p)),
                   description="lam*sin(z) + eps/(z - p)")


def _tan_tan(lam=1.0, mu=1.0):
    lam, mu = _c(lam), _c(mu)
    rule = WithInfinity(Lattice(math.pi / 2 / mu, math.pi / mu))
    return MapSpec("tan_tan", ex.tan(lam * ex.tan(mu * z)), rule, "Kinf", (),
                   (("lam", lam), ("mu", mu)), description="tan(lam*tan(mu*z))")


_FACTORIES = {
    "exp_lambda": _exp_lambda,
    "exp": _exp,
    "sin_lambda": _sin_lambda,
    "tan_lambda": _tan_lambda,
    "exp_over_z": _exp_over_z,
    "exp_alpha": _exp_alpha,
    "exp_plus_pole": _exp_plus_pole,
    "exp_inv_tan": _exp_inv_tan,
    "fatou": _fatou,
    "h": _h,
    "g": _g,
    "f": _f,
    "f_n": _f_n,
    "lambda_z_exp": _lambda_z_exp,
    "zsq_over_zm1": _zsq_over_zm1,
    "identity": _identity,
    "exp_inv_plus_pole": _exp_inv_plus_pole,
    "sin_plus_pole": _sin_plus_pole,
    "tan_tan": _tan_tan,
}

_CACHE = {}


def map_labels():
    return sorted(_FACTORIES)


def get_map(label: str, **params) -> MapSpec:
    """Catalog map by label; keyword arguments override default parameters.

    Maps without overrides are cached so repeated lookups return the same
    object (and share its derivative trees).
    """
    try:
        factory = _FACTORIES[label]
    except KeyError:
        raise UnknownMap(f"unknown map label {label!r}; known: {', '.join(map_labels())}") from None
    if params:
        return factory(**params)
    if label not in _CACHE:
        _CACHE[label] = factory()
    return _CACHE[label]


def builtin_catalog():
    """Every catalogued map at its default parameters."""
    return [get_map(label) for label in map_labels()]
