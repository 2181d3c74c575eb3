"""Probability measures on relaxation parameters and reproducible sample streams.

Every stream is keyed by ``(seed_base, run_index)`` and backed by a Philox
counter-based generator, so the draws of run ``k`` never depend on how many
other runs exist or which worker executes them.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from itertools import accumulate

import numpy as np

from .errors import UnsupportedKind

__all__ = [
    "LambdaMeasure",
    "UniformDisk",
    "UniformAnnulus",
    "FiniteSupport",
    "FamilyMeasure",
    "SampleStream",
    "sample",
    "log_potential",
    "contains_half_disk",
    "measure_from_json",
    "family_measure_from_json",
]

DEFAULT_SEED = 0
_BLOCK = 512
_TWO_PI = 2.0 * math.pi


def _in_lambda(lam: complex) -> bool:
    return abs(lam - 1) < 1


class LambdaMeasure:
    """Base class for measures on the disk {|lambda - 1| < 1}."""

    seed: int
    uniforms_per_draw: int = 1

    def stream(self, run_index: int) -> "SampleStream":
        return SampleStream(self, run_index)

    def is_finite(self) -> bool:
        return False

    def absolutely_continuous(self) -> bool:
        return not self.is_finite()

    def _draw(self, u: np.ndarray):
        raise NotImplementedError

    def _draw_many(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class UniformDisk(LambdaMeasure):
    """Normalized area measure on the closed disk |lambda - center| <= radius."""

    radius: float = 0.75
    center: complex = 1 + 0j
    seed: int = DEFAULT_SEED
    uniforms_per_draw: int = field(default=2, init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        if not 0 < self.radius < 1:
            raise ValueError(f"radius must lie in (0, 1), got {self.radius}")
        if abs(self.center - 1) + self.radius >= 1:
            raise ValueError("disk must lie strictly inside |lambda - 1| < 1")

    def _draw(self, u):
        rho = self.radius * math.sqrt(u[0])
        theta = _TWO_PI * u[1]
        return self.center + complex(rho * math.cos(theta), rho * math.sin(theta))

    def _draw_many(self, u):
        rho = self.radius * np.sqrt(u[0::2])
        return self.center + rho * np.exp(1j * _TWO_PI * u[1::2])

    def to_json(self) -> dict:
        out = {"kind": "uniform_disk", "radius": self.radius, "seed": self.seed}
        if self.center != 1:
            out["center"] = [self.center.real, self.center.imag]
        return out


@dataclass(frozen=True)
class UniformAnnulus(LambdaMeasure):
    """Normalized area measure on inner <= |lambda - 1| <= outer."""

    inner: float
    outer: float
    seed: int = DEFAULT_SEED
    uniforms_per_draw: int = field(default=2, init=False, repr=False)

    def __post_init__(self):
        if not 0 <= self.inner < self.outer < 1:
            raise ValueError("need 0 <= inner < outer < 1")

    def _draw(self, u):
        a2, b2 = self.inner**2, self.outer**2
        rho = math.sqrt(a2 + u[0] * (b2 - a2))
        theta = _TWO_PI * u[1]
        return 1 + complex(rho * math.cos(theta), rho * math.sin(theta))

    def _draw_many(self, u):
        a2, b2 = self.inner**2, self.outer**2
        rho = np.sqrt(a2 + u[0::2] * (b2 - a2))
        return 1 + rho * np.exp(1j * _TWO_PI * u[1::2])

    def to_json(self) -> dict:
        return {"kind": "uniform_annulus", "inner": self.inner, "outer": self.outer, "seed": self.seed}


def _check_atoms(atoms):
    probs = [p for *_, p in atoms]
    if not atoms:
        raise ValueError("finite measure needs at least one atom")
    if any(p <= 0 for p in probs):
        raise ValueError("atom probabilities must be positive")
    if abs(sum(probs) - 1) > 1e-12:
        raise ValueError(f"atom probabilities sum to {sum(probs)!r}, not 1")
    return list(accumulate(probs))


@dataclass(frozen=True)
class FiniteSupport(LambdaMeasure):
    """Finitely many atoms ``(lambda_j, p_j)`` inside the relaxation disk."""

    atoms: tuple[tuple[complex, float], ...]
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        atoms = tuple((complex(lam), float(p)) for lam, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        for lam, _ in atoms:
            if not _in_lambda(lam):
                raise ValueError(f"atom {lam!r} lies outside |lambda - 1| < 1")
        object.__setattr__(self, "_cdf", _check_atoms(atoms))

    def is_finite(self):
        return True

    def _index(self, u: float) -> int:
        return min(bisect.bisect_right(self._cdf, u), len(self.atoms) - 1)

    def _draw(self, u):
        return self.atoms[self._index(u[0])][0]

    def _draw_many(self, u):
        idx = np.minimum(np.searchsorted(self._cdf, u, side="right"), len(self.atoms) - 1)
        return np.array([lam for lam, _ in self.atoms])[idx]

    def to_family(self) -> "FamilyMeasure":
        return FamilyMeasure(tuple((0, lam, p) for lam, p in self.atoms), seed=self.seed)

    def to_json(self) -> dict:
        return {
            "kind": "finite",
            "atoms": [[[lam.real, lam.imag], p] for lam, p in self.atoms],
            "seed": self.seed,
        }


@dataclass(frozen=True)
class FamilyMeasure:
    """Finite measure on labelled generators ``(branch, lambda, p)``.

    Used for the example families whose parameters need not lie in the
    relaxation disk (e.g. the quadratic family with lambda = 6).
    """

    atoms: tuple[tuple[int, complex, float], ...]
    seed: int = DEFAULT_SEED
    uniforms_per_draw = 1

    def __post_init__(self):
        atoms = tuple((int(b), complex(lam), float(p)) for b, lam, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "_cdf", _check_atoms(atoms))

    @classmethod
    def of(cls, pairs, seed: int = DEFAULT_SEED) -> "FamilyMeasure":
        """Single-branch measure from ``(lambda, p)`` pairs."""
        return cls(tuple((0, lam, p) for lam, p in pairs), seed=seed)

    def is_finite(self):
        return True

    def stream(self, run_index: int) -> "SampleStream":
        return SampleStream(self, run_index)

    def _draw(self, u):
        i = min(bisect.bisect_right(self._cdf, u[0]), len(self.atoms) - 1)
        b, lam, _ = self.atoms[i]
        return b, lam

    def to_json(self) -> dict:
        return {
            "kind": "finite",
            "atoms": [[[lam.real, lam.imag], p, b] for b, lam, p in self.atoms],
            "seed": self.seed,
        }


class SampleStream:
    """Reproducible i.i.d. draws from a measure for one run.

    The draw sequence is a pure function of ``(measure.seed, run_index)``;
    ``position`` counts draws consumed so far.
    """

    def __init__(self, measure, run_index: int):
        if run_index < 0:
            raise ValueError("run_index must be non-negative")
        self.measure = measure
        self.run_index = run_index
        self.position = 0
        key = np.random.SeedSequence([int(measure.seed) & (2**64 - 1), int(run_index)])
        self._gen = np.random.Generator(np.random.Philox(key))
        self._buf = np.empty(0)
        self._i = 0

    def _uniforms(self, k: int) -> np.ndarray:
        if self._i + k > len(self._buf):
            rest = self._buf[self._i :]
            fresh = self._gen.random(max(_BLOCK, k))
            self._buf = np.concatenate([rest, fresh]) if len(rest) else fresh
            self._i = 0
        out = self._buf[self._i : self._i + k]
        self._i += k
        return out

    def sample(self):
        u = self._uniforms(self.measure.uniforms_per_draw)
        self.position += 1
        return self.measure._draw(u)

    def sample_many(self, n: int) -> np.ndarray:
        """Next ``n`` draws as an array; identical to ``n`` calls of :meth:`sample`."""
        u = self._uniforms(n * self.measure.uniforms_per_draw).copy()
        self.position += n
        return self.measure._draw_many(u)

    def __iter__(self):
        while True:
            yield self.sample()


def sample(stream: SampleStream):
    return stream.sample()


def log_potential(m: LambdaMeasure, a: complex) -> float:
    """Closed form of the integral of log|a - lambda| over a uniform disk."""
    if not isinstance(m, UniformDisk):
        raise UnsupportedKind(f"log_potential has no closed form for {type(m).__name__}")
    dist = abs(a - m.center)
    r = m.radius
    if dist >= r:
        return math.log(dist)
    return math.log(r) + (dist * dist - r * r) / (2 * r * r)


def contains_half_disk(m) -> bool:
    """Whether the interior of the support contains {|lambda - 1| <= 1/2}."""
    if isinstance(m, UniformDisk):
        return abs(m.center - 1) + 0.5 < m.radius
    if isinstance(m, UniformAnnulus):
        return m.inner == 0 and m.outer > 0.5
    return False


def _complex_from_json(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def measure_from_json(obj: dict, seed: int | None = None) -> LambdaMeasure:
    """Parse ``{"kind": "uniform_disk", "radius": 0.75, "seed": 42}`` and friends."""
    s = seed if seed is not None else int(obj.get("seed", DEFAULT_SEED))
    kind = obj.get("kind", "finite" if "atoms" in obj else None)
    if kind == "uniform_disk":
        center = _complex_from_json(obj.get("center", 1))
        return UniformDisk(float(obj["radius"]), center, seed=s)
    if kind == "uniform_annulus":
        return UniformAnnulus(float(obj["inner"]), float(obj["outer"]), seed=s)
    if kind == "finite":
        return FiniteSupport(tuple((_complex_from_json(a[0]), float(a[1])) for a in obj["atoms"]), seed=s)
    raise ValueError(f"unknown measure kind {kind!r}")


def family_measure_from_json(obj: dict, seed: int | None = None) -> FamilyMeasure:
    """Finite generator measure; atoms are ``[lambda, p]`` or ``[lambda, p, branch]``."""
    if obj.get("kind", "finite") != "finite":
        raise ValueError("family measures must have kind 'finite'")
    s = seed if seed is not None else int(obj.get("seed", DEFAULT_SEED))
    atoms = []
    for a in obj["atoms"]:
        branch = int(a[2]) if len(a) > 2 else 0
        atoms.append((branch, _complex_from_json(a[0]), float(a[1])))
    return FamilyMeasure(tuple(atoms), seed=s)
