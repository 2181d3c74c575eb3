"""Complex polynomial arithmetic: Horner evaluation, deflation, scaling.

Coefficients are stored in ascending order, ``coeffs[k]`` multiplies ``z**k``.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import RemainderTooLarge

__all__ = [
    "Polynomial",
    "RootRecord",
    "evaluate",
    "evaluate_with_derivative",
    "derivative",
    "deflate",
    "normalize",
    "cauchy_bound",
    "estimate_multiplicity",
    "from_roots",
    "parse_polynomial",
]

DEFLATION_TOLERANCE = 1e-6
MULTIPLICITY_THRESHOLD = 1e-6


class Polynomial:
    """Immutable polynomial with complex coefficients in ascending order."""

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Iterable[complex]):
        cs = [complex(c) for c in coeffs]
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        if not cs or (len(cs) == 1 and cs[0] == 0):
            raise ValueError("zero polynomial")
        if any(not (math.isfinite(c.real) and math.isfinite(c.imag)) for c in cs):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "_coeffs", tuple(cs))

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    def __reduce__(self):
        return (Polynomial, (self._coeffs,))

    @property
    def coeffs(self) -> tuple[complex, ...]:
        return self._coeffs

    @property
    def degree(self) -> int:
        return len(self._coeffs) - 1

    @property
    def leading(self) -> complex:
        return self._coeffs[-1]

    def __call__(self, z: complex) -> complex:
        return evaluate(self, z)

    def __eq__(self, other):
        return isinstance(other, Polynomial) and self._coeffs == other._coeffs

    def __hash__(self):
        return hash(self._coeffs)

    def __repr__(self):
        return f"Polynomial({list(self._coeffs)!r})"

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        a, b = self._coeffs, other._coeffs
        out = [0j] * (len(a) + len(b) - 1)
        for i, ai in enumerate(a):
            for j, bj in enumerate(b):
                out[i + j] += ai * bj
        return Polynomial(out)

    def monic(self) -> "Polynomial":
        lead = self.leading
        return Polynomial(c / lead for c in self._coeffs)

    def scale(self, z: complex) -> float:
        """Sum of |c_k| |z|^k; the natural magnitude of p(z) for rounding purposes."""
        r = abs(z)
        acc = 0.0
        for c in reversed(self._coeffs):
            acc = acc * r + abs(c)
        return acc

    def to_json(self) -> list[list[float]]:
        return [[c.real, c.imag] for c in self._coeffs]

    def digest(self) -> str:
        """Stable short hash of the coefficient vector."""
        payload = json.dumps(self.to_json()).encode()
        return hashlib.sha256(payload).hexdigest()[:16]

    def __str__(self):
        out = ""
        for k, c in enumerate(self._coeffs):
            if c == 0:
                continue
            if c.imag == 0:
                sign, cs = ("-" if c.real < 0 else "+"), f"{abs(c.real):.17g}"
            else:
                sign, cs = "+", f"({c.real:.17g}{c.imag:+.17g}i)"
            if cs == "1" and k > 0:
                cs = ""
            term = cs if k == 0 else f"{cs}z" if k == 1 else f"{cs}z^{k}"
            out = (f"-{term}" if sign == "-" else term) if not out else f"{out} {sign} {term}"
        return out


@dataclass(frozen=True)
class RootRecord:
    """A root of the original polynomial.

    ``residual`` is the absolute value |g(value)|; ``polished`` records whether
    the relative residual |g(value)| / sum |c_k||value|^k met the configured
    tolerance.
    """

    value: complex
    multiplicity_estimate: int = 1
    residual: float = 0.0
    polished: bool = False

    def to_json(self) -> dict:
        return {
            "value": [self.value.real, self.value.imag],
            "multiplicity_estimate": self.multiplicity_estimate,
            "residual": self.residual,
            "polished": self.polished,
        }


def evaluate(p: Polynomial, z: complex) -> complex:
    acc = 0j
    for c in reversed(p.coeffs):
        acc = acc * z + c
    return acc


def evaluate_with_derivative(p: Polynomial, z: complex) -> tuple[complex, complex]:
    """Return ``(p(z), p'(z))`` from a single Horner pass."""
    cs = p.coeffs
    val = cs[-1]
    der = 0j
    for c in reversed(cs[:-1]):
        der = der * z + val
        val = val * z + c
    return val, der


def evaluate_derivatives(p: Polynomial, z: complex, count: int) -> list[complex]:
    """Return ``[p(z), p'(z), ..., p^{(count)}(z)]`` via repeated synthetic division."""
    cs = list(p.coeffs)
    n = len(cs) - 1
    out = []
    work = cs[:]
    for m in range(count + 1):
        if m > n:
            out.append(0j)
            continue
        acc = 0j
        rem = []
        for c in reversed(work):
            acc = acc * z + c
            rem.append(acc)
        # rem holds Horner partials from the top; the last one is the value
        out.append(rem[-1] * math.factorial(m))
        work = list(reversed(rem[:-1]))
    return out


def derivative(p: Polynomial) -> Polynomial:
    if p.degree == 0:
        raise ValueError("derivative of a constant")
    return Polynomial(k * c for k, c in enumerate(p.coeffs) if k > 0)


def _synthetic_division(cs: Sequence[complex], x: complex) -> tuple[list[complex], complex]:
    n = len(cs) - 1
    q = [0j] * n
    acc = cs[-1]
    for k in range(n - 1, -1, -1):
        q[k] = acc
        acc = acc * x + cs[k]
    return q, acc


def deflate(p: Polynomial, x: complex, tol: float = DEFLATION_TOLERANCE) -> Polynomial:
    """Divide out ``(z - x)`` by synthetic division.

    The remainder is discarded when it is small relative to ``p.scale(x)``;
    otherwise ``x`` is not accepted as a root and :class:`RemainderTooLarge`
    is raised.
    """
    if p.degree < 1:
        raise ValueError("cannot deflate a constant")
    q, rem = _synthetic_division(p.coeffs, x)
    bound = tol * p.scale(x)
    if abs(rem) > bound:
        raise RemainderTooLarge(rem, bound)
    return Polynomial(q)


def cauchy_bound(p: Polynomial) -> float:
    """1 + max |c_k / c_n|; every root lies strictly inside this radius."""
    lead = abs(p.leading)
    if p.degree == 0:
        return 1.0
    return 1.0 + max(abs(c) / lead for c in p.coeffs[:-1])


def normalize(p: Polynomial) -> tuple[Polynomial, float]:
    """Rescale so that every root lies in the open unit disk.

    Returns ``(h, a)`` with ``h(z) = p(a z)``; roots of ``p`` are ``a`` times
    the roots of ``h``.
    """
    if p.degree < 1:
        raise ValueError("normalize needs degree >= 1")
    a = cauchy_bound(p)
    return Polynomial(c * a**k for k, c in enumerate(p.coeffs)), a


def estimate_multiplicity(
    p: Polynomial, x: complex, threshold: float = MULTIPLICITY_THRESHOLD, return_confidence: bool = False
):
    """Smallest m >= 1 with |p^{(m)}(x)| significant, capped at deg(p).

    A derivative of order m counts as significant when it exceeds
    ``threshold * m! * sum_k |c_k| rho^k`` with ``rho = max(1, |x|)``. When
    ``|p(x)|`` is itself not small the answer is 1 with low confidence.
    """
    n = p.degree
    rho = max(1.0, abs(x))
    size = p.scale(rho)
    ders = evaluate_derivatives(p, x, n)
    confident = abs(ders[0]) <= threshold * size
    m = 1
    if confident:
        for k in range(1, n + 1):
            if abs(ders[k]) > threshold * math.factorial(k) * size:
                m = k
                break
        else:
            m, confident = n, False
    return (m, confident) if return_confidence else m


def from_roots(roots: Iterable[complex], leading: complex = 1.0) -> Polynomial:
    cs = [complex(leading)]
    for r in roots:
        nxt = [0j] * (len(cs) + 1)
        for k, c in enumerate(cs):
            nxt[k + 1] += c
            nxt[k] -= r * c
        cs = nxt
    return Polynomial(cs)


# -- parsing ---------------------------------------------------------------

_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TERM = re.compile(
    r"""\s*(?P<sign>[+-])?\s*
        (?:
            \((?P<paren>[^)]*)\)
          | (?P<num>""" + _NUM + r""")?\s*(?P<imag>[ij])?
        )\s*\*?\s*
        (?P<var>[zx](?:\s*(?:\^|\*\*)\s*(?P<pow>\d+))?)?
    """,
    re.VERBOSE,
)


def _parse_complex(text: str) -> complex:
    t = text.replace(" ", "").replace("i", "j")
    if t in ("", "+"):
        return 1 + 0j
    if t == "-":
        return -1 + 0j
    return complex(t)


def _parse_string(text: str) -> Polynomial:
    s = text.replace("−", "-").strip()
    if not s:
        raise ValueError("empty polynomial string")
    coeffs: dict[int, complex] = {}
    pos = 0
    first = True
    while pos < len(s):
        m = _TERM.match(s, pos)
        if m is None or m.end() == pos:
            raise ValueError(f"cannot parse polynomial near {s[pos:]!r}")
        if not first and m.group("sign") is None:
            raise ValueError(f"missing operator near {s[pos:]!r}")
        sign = -1 if m.group("sign") == "-" else 1
        if m.group("paren") is not None:
            c = _parse_complex(m.group("paren"))
        elif m.group("num") is not None or m.group("imag") is not None:
            num = float(m.group("num")) if m.group("num") is not None else 1.0
            c = complex(0, num) if m.group("imag") else complex(num)
        elif m.group("var") is not None:
            c = 1 + 0j
        else:
            raise ValueError(f"cannot parse polynomial near {s[pos:]!r}")
        if m.group("var") is None:
            k = 0
        else:
            k = int(m.group("pow")) if m.group("pow") else 1
        coeffs[k] = coeffs.get(k, 0j) + sign * c
        pos = m.end()
        first = False
    n = max(coeffs)
    return Polynomial(coeffs.get(k, 0j) for k in range(n + 1))


def _coeff_from_json(c) -> complex:
    if isinstance(c, (list, tuple)):
        if len(c) != 2:
            raise ValueError(f"coefficient pair must be [re, im], got {c!r}")
        return complex(float(c[0]), float(c[1]))
    return complex(c)


def parse_polynomial(spec) -> Polynomial:
    """Build a polynomial from a string like ``"1 - 2z + z^3"`` or a JSON array.

    JSON arrays hold ascending coefficients, each either a number or an
    ``[re, im]`` pair.
    """
    if isinstance(spec, Polynomial):
        return spec
    if isinstance(spec, str):
        text = spec.strip()
        if text.startswith("["):
            return parse_polynomial(json.loads(text))
        return _parse_string(text)
    if isinstance(spec, dict):
        return parse_polynomial(spec["coeffs"])
    return Polynomial(_coeff_from_json(c) for c in spec)
