"""Chordal metric and spherical derivative norms on the Riemann sphere.

The point at infinity is represented by ``INF`` (``complex("inf")``); any
complex number with an infinite component counts as infinity.
"""

from __future__ import annotations

import cmath
import math

__all__ = ["INF", "is_inf", "chordal", "spherical_deriv_norm", "point_to_json", "point_from_json"]

INF = complex(math.inf, 0.0)


def is_inf(z) -> bool:
    return cmath.isinf(z)


def chordal(z: complex, w: complex) -> float:
    """d(z, w) = 2|z - w| / sqrt((1 + |z|^2)(1 + |w|^2)), extended to infinity."""
    zi, wi = is_inf(z), is_inf(w)
    if zi and wi:
        return 0.0
    if zi:
        return 2.0 / math.hypot(1.0, abs(w))
    if wi:
        return 2.0 / math.hypot(1.0, abs(z))
    return 2.0 * abs(z - w) / (math.hypot(1.0, abs(z)) * math.hypot(1.0, abs(w)))


def spherical_deriv_norm(fprime: complex, z: complex, fz: complex) -> float:
    """Operator norm of Df_z from the chordal metric to itself.

    ``fprime`` is the derivative in the local charts: the coordinate z near
    a finite point and 1/z near infinity. For finite z and f(z) this is
    |f'(z)| (1 + |z|^2) / (1 + |f(z)|^2); when both are infinity it is the
    modulus of the multiplier in the 1/z chart.
    """
    a = abs(fprime)
    zi, fi = is_inf(z), is_inf(fz)
    if zi and fi:
        return a
    if zi:
        # chart u = 1/z at the source, f finite at the target
        return a / (1 + abs(fz) ** 2)
    if fi:
        # target chart 1/f, fprime is d(1/f)/dz
        return a * (1 + abs(z) ** 2)
    rz, rf = abs(z), abs(fz)
    return a * (1 + rz * rz) / (1 + rf * rf)


def point_to_json(z):
    if is_inf(z):
        return "inf"
    return [z.real, z.imag]


def point_from_json(v) -> complex:
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "infinity", "∞"):
            return INF
        return complex(v.replace("i", "j").replace(" ", ""))
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)
