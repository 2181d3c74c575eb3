"""One-parameter families of maps with a known finite invariant point set.

Each family exposes map evaluation, its derivative, and, on its invariant
set, the combinatorial transition and spherical multiplier in closed form.
Generators are addressed as ``(branch, lam)``.
"""

from __future__ import annotations

import cmath
import math
from typing import Sequence

import numpy as np

from .errors import NoFiniteInvariantSet
from .poly import Polynomial, derivative, estimate_multiplicity, evaluate_with_derivative, from_roots
from .sphere import INF, is_inf

__all__ = ["GeneratorFamily", "RelaxedNewton", "Quadratic", "Rotation", "EmbeddedMarkov"]

_BIG = 1e150


class GeneratorFamily:
    name = "family"
    branches = 1

    def points(self) -> list[complex]:
        raise NoFiniteInvariantSet(f"{self.name} has no known finite invariant set")

    def evaluate(self, branch: int, lam: complex, z: complex) -> complex:
        raise NotImplementedError

    def deriv(self, branch: int, lam: complex, z: complex) -> complex:
        raise NotImplementedError

    def transition(self, branch: int, lam: complex, i: int) -> int:
        """Index of the image of ``points()[i]``."""
        raise NotImplementedError

    def point_multiplier(self, branch: int, lam: complex, i: int) -> float:
        """Spherical derivative norm of the generator at ``points()[i]``."""
        raise NotImplementedError

    def step(self, branch: int, lam: complex, z: complex) -> complex:
        """Map a point of the sphere, sending overflowing values to infinity."""
        if is_inf(z):
            return INF
        w = self.evaluate(branch, lam, z)
        if is_inf(w) or cmath.isnan(w) or abs(w) > _BIG:
            return INF
        return w

    def to_json(self) -> dict:
        return {"family": self.name}


class RelaxedNewton(GeneratorFamily):
    """N_lam(z) = z - lam g(z)/g'(z). Invariant points: roots of g and infinity."""

    name = "relaxed-newton"

    def __init__(self, g: Polynomial, roots: Sequence[complex] | None = None, multiplicities=None):
        if g.degree < 2:
            raise ValueError("relaxed Newton family needs deg(g) >= 2")
        self.g = g
        self.dg = derivative(g)
        self._roots = None if roots is None else [complex(r) for r in roots]
        self._mult = None if multiplicities is None else list(multiplicities)

    def _ensure_roots(self):
        if self._roots is None:
            from .newton_engine import find_all_roots
            from .measure import UniformDisk

            recs = find_all_roots(self.g, UniformDisk(0.75, seed=0))
            distinct: list[tuple[complex, int]] = []
            for r in recs:
                if all(abs(r.value - x) > 1e-5 * (1 + abs(x)) for x, _ in distinct):
                    distinct.append((r.value, r.multiplicity_estimate))
            self._roots = [x for x, _ in distinct]
            self._mult = [m for _, m in distinct]
        if self._mult is None:
            self._mult = [estimate_multiplicity(self.g, x) for x in self._roots]

    @property
    def roots(self) -> list[complex]:
        self._ensure_roots()
        return list(self._roots)

    @property
    def multiplicities(self) -> list[int]:
        self._ensure_roots()
        return list(self._mult)

    def points(self):
        return self.roots + [INF]

    def evaluate(self, branch, lam, z):
        gz, dz = evaluate_with_derivative(self.g, z)
        if gz == 0:
            return z
        if dz == 0:
            return INF
        return z - lam * gz / dz

    def step(self, branch, lam, z):
        if is_inf(z):
            return INF
        return self.evaluate(branch, lam, z)

    def deriv(self, branch, lam, z):
        # N' = 1 - lam + lam g g'' / g'^2
        gz, dz = evaluate_with_derivative(self.g, z)
        d2 = evaluate_with_derivative(self.dg, z)[1]
        return 1 - lam + lam * gz * d2 / (dz * dz)

    def transition(self, branch, lam, i):
        return i

    def point_multiplier(self, branch, lam, i):
        self._ensure_roots()
        if i == len(self._roots):
            return 1.0 / abs(1 - lam / self.g.degree)
        return abs(1 - lam / self._mult[i])

    def to_json(self):
        return {"family": self.name, "poly": self.g.to_json()}


class Quadratic(GeneratorFamily):
    """f_lam(z) = lam z (1 - z). Invariant points: 0, 1 and infinity (1 maps to 0)."""

    name = "quadratic"

    def points(self):
        return [0j, 1 + 0j, INF]

    def evaluate(self, branch, lam, z):
        return lam * z * (1 - z)

    def deriv(self, branch, lam, z):
        return lam * (1 - 2 * z)

    def transition(self, branch, lam, i):
        return (0, 0, 2)[i]

    def point_multiplier(self, branch, lam, i):
        if i == 2:
            return 0.0
        # images are 0 for both finite points, so the target factor is 1
        z = (0.0, 1.0)[i]
        return abs(lam * (1 - 2 * z)) * (1 + z * z)


class Rotation(GeneratorFamily):
    """f_{j,lam}(z) = w^{i_j} (z + lam (z^n - 1)) with w = exp(2 pi i / n).

    Branch ``j`` uses exponent ``exponents[j]``; the invariant set is the
    n-th roots of unity, each generator rotating it by w^{i_j}.
    """

    name = "rotation"

    def __init__(self, n: int, exponents: Sequence[int] = (1,), include_infinity: bool = False):
        if n < 2:
            raise ValueError("rotation family needs n >= 2")
        self.n = n
        self.exponents = [int(e) % n for e in exponents]
        self.branches = len(self.exponents)
        self.w = cmath.exp(2j * math.pi / n)
        self.include_infinity = include_infinity

    def _root(self, k):
        # exact values for the common axes keep images on the grid
        k %= self.n
        if 4 * k % self.n == 0:
            return (1 + 0j, 1j, -1 + 0j, -1j)[4 * k // self.n]
        return cmath.exp(2j * math.pi * k / self.n)

    def points(self):
        pts = [self._root(k) for k in range(self.n)]
        return pts + [INF] if self.include_infinity else pts

    def evaluate(self, branch, lam, z):
        return self._root(self.exponents[branch]) * (z + lam * (z**self.n - 1))

    def deriv(self, branch, lam, z):
        return self._root(self.exponents[branch]) * (1 + lam * self.n * z ** (self.n - 1))

    def transition(self, branch, lam, i):
        if i == self.n:
            return i
        return (i + self.exponents[branch]) % self.n

    def point_multiplier(self, branch, lam, i):
        if i == self.n:
            return 0.0
        z = self._root(i)
        return abs(1 + lam * self.n * z ** (self.n - 1))

    def to_json(self):
        return {"family": self.name, "n": self.n, "exponents": self.exponents}


class EmbeddedMarkov(GeneratorFamily):
    """f_{j,lam}(z) = P_j(z + lam g(z)) with g = prod (z - x_k).

    ``maps[j]`` is an index map on the points; P_j interpolates it on the
    points (plus g when the interpolant would be constant, so every P_j is
    non-constant).
    """

    name = "embedded-markov"

    def __init__(self, points: Sequence[complex], maps: Sequence[Sequence[int]], include_infinity: bool = False):
        pts = [complex(x) for x in points]
        u = len(pts)
        if u < 2:
            raise ValueError("need at least two points")
        if len({(round(x.real, 12), round(x.imag, 12)) for x in pts}) != u:
            raise ValueError("points must be distinct")
        self.x = pts
        self.maps = [list(map(int, m)) for m in maps]
        for m in self.maps:
            if len(m) != u or any(not 0 <= v < u for v in m):
                raise ValueError("each map must send every point index into range")
        self.branches = len(self.maps)
        self.include_infinity = include_infinity
        self.g = from_roots(pts)
        self.dg = derivative(self.g)
        self.P = [self._interpolant(m) for m in self.maps]
        self.dP = [derivative(p) if p.degree >= 1 else None for p in self.P]

    def _interpolant(self, m):
        V = np.vander(np.array(self.x), increasing=True)
        c = np.linalg.solve(V, np.array([self.x[v] for v in m]))
        c = np.where(np.abs(c) < 1e-13 * max(1.0, np.abs(c).max()), 0, c)
        coeffs = [complex(v) for v in c]
        if all(v == 0 for v in coeffs[1:]):
            coeffs = [a + b for a, b in zip(self.g.coeffs, coeffs + [0j])]
        return Polynomial(coeffs)

    def points(self):
        return self.x + [INF] if self.include_infinity else list(self.x)

    def evaluate(self, branch, lam, z):
        return self.P[branch](z + lam * self.g(z))

    def deriv(self, branch, lam, z):
        gz, dgz = evaluate_with_derivative(self.g, z)
        return self.dP[branch](z + lam * gz) * (1 + lam * dgz)

    def transition(self, branch, lam, i):
        if i == len(self.x):
            return i
        return self.maps[branch][i]

    def point_multiplier(self, branch, lam, i):
        if i == len(self.x):
            return 0.0
        x = self.x[i]
        fx = self.x[self.maps[branch][i]]
        d = self.dP[branch](x) * (1 + lam * self.dg(x))
        return abs(d) * (1 + abs(x) ** 2) / (1 + abs(fx) ** 2)

    def to_json(self):
        return {"family": self.name, "points": [[x.real, x.imag] for x in self.x], "maps": self.maps}
