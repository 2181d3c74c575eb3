import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochnewton.errors import RemainderTooLarge
from stochnewton.poly import (
    Polynomial,
    cauchy_bound,
    deflate,
    derivative,
    estimate_multiplicity,
    evaluate,
    evaluate_derivatives,
    evaluate_with_derivative,
    from_roots,
    normalize,
    parse_polynomial,
)

Z2M1 = Polynomial([-1, 0, 1])
HURLEY = Polynomial([2, -2, 0, 1])


def _real_root_oracle():
    # bisection on the real line at 50 digits; z^3 - 2z + 2 changes sign on [-2, -1.5]
    mpmath.mp.dps = 50
    return complex(mpmath.findroot(lambda t: t**3 - 2 * t + 2, (-2, -1.5), solver="bisect"))


@pytest.mark.parametrize(
    "p, z, expected",
    [(Z2M1, 2, 3), (Z2M1, 1j, -2), (HURLEY, 0, 2)],
)
def test_evaluate_examples(p, z, expected):
    assert evaluate(p, z) == expected
    assert p(z) == expected


def test_evaluate_with_derivative_single_pass():
    val, der = evaluate_with_derivative(HURLEY, 1.5 - 0.5j)
    assert val == pytest.approx(HURLEY(1.5 - 0.5j), abs=1e-14)
    assert der == pytest.approx(derivative(HURLEY)(1.5 - 0.5j), abs=1e-14)


@pytest.mark.parametrize(
    "p, expected",
    [(Z2M1, [0, 2]), (HURLEY, [-2, 0, 3])],
)
def test_derivative_examples(p, expected):
    d = derivative(p)
    assert d.coeffs == tuple(complex(c) for c in expected)
    assert d.degree == p.degree - 1


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_derivative_of_monomial(n):
    a = 1.5 - 2j
    d = derivative(Polynomial([0] * n + [a]))
    assert d.coeffs[-1] == n * a
    assert all(c == 0 for c in d.coeffs[:-1])


def test_evaluate_derivatives_matches_repeated_derivative():
    p = from_roots([0.3, 0.3, 0.3, -0.4])
    z = 0.7 + 0.2j
    ders = evaluate_derivatives(p, z, 4)
    q = p
    for k in range(4):
        assert ders[k] == pytest.approx(q(z), abs=1e-12)
        q = derivative(q)
    assert ders[4] == pytest.approx(24)


def test_deflate_exact_cases():
    assert deflate(Z2M1, 1) == Polynomial([1, 1])
    sq = from_roots([0.5, 0.5])
    q = deflate(sq, 0.5)
    assert q.coeffs == pytest.approx((-0.5, 1))


def test_deflate_hurley_against_bisection_oracle():
    r0 = _real_root_oracle()
    assert r0.real == pytest.approx(-1.76929235, abs=1e-8)
    q = deflate(HURLEY, r0)
    a, b, c = q.coeffs[2], q.coeffs[1], q.coeffs[0]
    disc = cmath.sqrt(b * b - 4 * a * c)
    roots = sorted([(-b + disc) / (2 * a), (-b - disc) / (2 * a)], key=lambda z: z.imag)
    assert roots[0] == pytest.approx(0.88464618 - 0.58974281j, abs=1e-8)
    assert roots[1] == pytest.approx(0.88464618 + 0.58974281j, abs=1e-8)


def test_deflate_rejects_non_root():
    with pytest.raises(RemainderTooLarge):
        deflate(Z2M1, 0.5)


def test_normalize_examples():
    h, a = normalize(Polynomial([-4, 0, 1]))
    assert a == 5
    assert h.coeffs == (-4, 0, 25)
    h, a = normalize(HURLEY)
    assert a == 3
    assert h.coeffs == (2, -6, 0, 27)
    assert np.abs(np.roots(h.coeffs[::-1])).max() < 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=50, allow_nan=False, allow_infinity=False), min_size=2, max_size=8))
def test_normalize_puts_roots_in_unit_disk(coeffs):
    if abs(coeffs[-1]) < 1e-3:
        coeffs[-1] = 1
    p = Polynomial(coeffs)
    h, a = normalize(p)
    rho = np.abs(np.roots(np.array(h.coeffs[::-1])))
    assert rho.max() < 1
    assert a == pytest.approx(cauchy_bound(p))


@pytest.mark.parametrize(
    "p, x, m",
    [
        (from_roots([0.5, 0.5]), 0.5, 2),
        (Z2M1, 1, 1),
        (from_roots([0.3, 0.3, 0.3, -0.4]), 0.3, 3),
        (from_roots([1j, 1j, 1j, 1j, 2]), 1j, 4),
    ],
)
def test_estimate_multiplicity(p, x, m):
    assert estimate_multiplicity(p, x) == m


def test_estimate_multiplicity_low_confidence_off_root():
    m, confident = estimate_multiplicity(Z2M1, 0.5, return_confidence=True)
    assert m == 1 and not confident


def test_deflation_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(3, 9))
        roots = 0.9 * np.exp(2j * np.pi * (np.arange(n) + rng.uniform(-0.2, 0.2, n)) / n)
        p = from_roots(roots)
        for x in roots:
            q = deflate(p, x)
            back = (q * Polynomial([-x, 1])).coeffs
            err = max(abs(u - v) for u, v in zip(back, p.coeffs)) / max(abs(c) for c in p.coeffs)
            assert err <= 1e-10


def test_difference_quotient_consistency():
    p = from_roots([0.2 + 0.1j, -0.7, 1.3j, 0.5])
    dp = derivative(p)
    eps = 1e-6
    for re in np.linspace(-1.5, 1.5, 7):
        for im in np.linspace(-1.5, 1.5, 7):
            z = complex(re, im)
            fd = (p(z + eps) - p(z)) / eps
            assert abs(fd - dp(z)) <= 50 * eps * max(1.0, abs(z)) ** 4


@pytest.mark.parametrize(
    "text, coeffs",
    [
        ("1 - 2z + z^3", [1, -2, 0, 1]),
        ("−1 + z^2", [-1, 0, 1]),
        ("z**2 + 1", [1, 0, 1]),
        ("(1+2i) z - 3", [-3, 1 + 2j]),
        ("2.5e-1*x^2 - i", [-1j, 0, 0.25]),
        ("[[1, 0], [0, 2]]", [1, 2j]),
        ("[-1, 0, 1]", [-1, 0, 1]),
    ],
)
def test_parse_polynomial(text, coeffs):
    assert parse_polynomial(text).coeffs == tuple(complex(c) for c in coeffs)


@pytest.mark.parametrize("bad", ["", "zz", "1 +", "0", "[0]"])
def test_parse_polynomial_rejects(bad):
    with pytest.raises(ValueError):
        parse_polynomial(bad)


def test_polynomial_is_immutable_and_json_round_trips():
    p = parse_polynomial("2 - 2z + z^3")
    with pytest.raises(AttributeError):
        p.foo = 1
    assert parse_polynomial(p.to_json()) == p
    assert p.digest() == parse_polynomial(p.to_json()).digest()
    assert math.isfinite(abs(p(1e3)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-9, 9), st.integers(-9, 9)), min_size=2, max_size=7))
def test_string_round_trip(pairs):
    if pairs[-1] == (0, 0):
        pairs[-1] = (1, 0)
    p = Polynomial(complex(a, b) for a, b in pairs)
    assert parse_polynomial(str(p)) == p
