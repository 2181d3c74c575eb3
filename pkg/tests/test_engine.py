import math

import numpy as np
import pytest

from stochnewton.errors import HitCriticalPoint, IncompleteFactorization
from stochnewton.measure import FiniteSupport, UniformDisk
from stochnewton.montecarlo import empirical_rate
from stochnewton.newton_engine import (
    EngineConfig,
    Status,
    deterministic_newton,
    find_all_roots,
    newton_map,
    polish,
    run_random_orbit,
)
from stochnewton.poly import Polynomial, from_roots, parse_polynomial
from stochnewton.dynamics import lyapunov_fixed_point
from stochnewton.families import RelaxedNewton

TAU = UniformDisk(0.75)
Z2M1 = parse_polynomial("-1 + z^2")
HURLEY = parse_polynomial("2 - 2z + z^3")


def _companion_roots(p: Polynomial) -> np.ndarray:
    return np.roots(np.array(p.coeffs[::-1]))


def _match(found, expected, tol):
    found = list(found)
    for x in expected:
        i = min(range(len(found)), key=lambda k: abs(found[k] - x))
        assert abs(found[i] - x) <= tol, (found, expected)
        found.pop(i)
    assert not found


def _separated_poly(rng, n, sep=0.05):
    while True:
        roots = 0.9 * np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))
        d = np.abs(roots[:, None] - roots[None, :]) + np.eye(n) * 9
        if d.min() >= sep:
            return roots


@pytest.mark.parametrize(
    "lam, z, expected",
    [(1, 2, 1.25), (0.5, 1, 1), (1.6 + 0.3j, 1, 1), (0.7, -1, -1)],
)
def test_newton_map_examples(lam, z, expected):
    assert newton_map(Z2M1, lam, z) == pytest.approx(expected, abs=1e-15)


def test_newton_map_raises_at_critical_point():
    with pytest.raises(HitCriticalPoint):
        newton_map(parse_polynomial("z^2 + 1"), 1, 0)


def test_newton_map_fixes_multiple_root():
    p = from_roots([0.5, 0.5])
    assert newton_map(p, 0.8, 0.5) == 0.5


def test_fixed_point_invariance():
    rng = np.random.default_rng(2)
    lams = TAU.stream(0).sample_many(50)
    for _ in range(10):
        p = Polynomial(rng.normal(size=6) + 1j * rng.normal(size=6))
        for x in (r.value for r in find_all_roots(p, TAU)):
            for lam in lams:
                assert abs(newton_map(p, lam, x) - x) <= 1e-12 * (1 + abs(x))


def test_orbit_z2m1_from_two():
    hits = 0
    for k in range(1000):
        out = run_random_orbit(Z2M1, TAU, 2, (), run_index=k)
        if out.converged and abs(out.final_z - 1) < 1e-12 and out.iterations <= 200:
            hits += 1
    assert hits >= 999


def test_orbit_escapes_hurley_cycle():
    hits = sum(run_random_orbit(HURLEY, TAU, 0, (), run_index=k).converged for k in range(1000))
    assert hits >= 999


def test_orbit_started_at_root():
    roots = find_all_roots(Z2M1, TAU)
    out = run_random_orbit(Z2M1, TAU, 1, roots)
    assert out.status is Status.CONVERGED and out.iterations == 0
    assert roots[out.root_index].value == pytest.approx(1)


def test_orbit_propagates_critical_point():
    with pytest.raises(HitCriticalPoint) as exc:
        run_random_orbit(parse_polynomial("z^2 + 1"), TAU, 0)
    assert exc.value.iterations == 0


def test_orbit_reproducible():
    cfg = EngineConfig(trace=True)
    a = run_random_orbit(HURLEY, TAU, 0, (), cfg, 5)
    b = run_random_orbit(HURLEY, TAU, 0, (), cfg, 5)
    assert a == b


def test_escape_with_expanding_measure():
    # lam = 5 lies outside any valid measure; it makes infinity attracting, N(z) ~ -1.5 z
    class Fixed:
        def stream(self, k):
            return self

        def sample(self):
            return 5.0

    out = run_random_orbit(Z2M1, Fixed(), 100)
    assert out.status is Status.ESCAPED


def test_large_excursion_is_not_an_escape():
    # a start next to a critical point is thrown far out, then contracts back
    out = run_random_orbit(Z2M1, TAU, 1e-3, (), None, 0)
    assert out.converged


def test_max_iterations_reported():
    cfg = EngineConfig(max_iterations=3)
    out = run_random_orbit(Z2M1, TAU, 50, (), cfg)
    assert out.status is Status.MAX_ITERATIONS and out.iterations == 3


def test_find_all_roots_z2m1():
    recs = find_all_roots(Z2M1, TAU)
    _match([r.value for r in recs], [1, -1], 1e-12)
    assert all(r.residual < 1e-10 and r.polished for r in recs)


def test_find_all_roots_hurley_against_companion():
    recs = find_all_roots(HURLEY, TAU)
    _match([r.value for r in recs], _companion_roots(HURLEY), 1e-10)
    _match([r.value for r in recs], [-1.76929235, 0.88464618 + 0.58974281j, 0.88464618 - 0.58974281j], 1e-8)


def test_find_all_roots_wilkinson_lite():
    roots = [k / 10 for k in range(1, 9)]
    recs = find_all_roots(from_roots(roots), TAU)
    _match([r.value for r in recs], roots, 1e-6)


def test_find_all_roots_degree_one_and_multiple():
    recs = find_all_roots(Polynomial([3, 2]), TAU)
    assert recs[0].value == pytest.approx(-1.5)
    recs = find_all_roots(from_roots([0.5, 0.5, -0.2]), TAU)
    assert sorted(round(r.value.real, 5) for r in recs) == [-0.2, 0.5, 0.5]


def test_find_all_roots_exhausted_budget():
    cfg = EngineConfig(max_iterations=1, retry_budget=1)
    with pytest.raises(IncompleteFactorization):
        find_all_roots(from_roots([0.1, 0.2, 0.3, 0.4, 0.5]), TAU, cfg, z0=50)


def test_deflation_consistency():
    rng = np.random.default_rng(7)
    for n in range(2, 11):
        p = from_roots(_separated_poly(rng, n), leading=rng.normal() + 1j)
        recs = find_all_roots(p, TAU)
        back = from_roots([r.value for r in recs]).coeffs
        target = p.monic().coeffs
        err = max(abs(u - v) for u, v in zip(back, target)) / max(abs(c) for c in target)
        assert err <= 1e-8


@pytest.mark.parametrize(
    "g, z0, status, extra",
    [
        (HURLEY, 0, Status.CYCLE, 2),
        (Z2M1, 2, Status.CONVERGED, 1),
        (HURLEY, -3, Status.CONVERGED, -1.76929235),
    ],
)
def test_deterministic_newton(g, z0, status, extra):
    out = deterministic_newton(g, z0)
    assert out.status is status
    if status is Status.CYCLE:
        assert out.cycle_length == extra
    else:
        assert out.final_z == pytest.approx(extra, abs=1e-8)
        assert out.iterations <= 8


def test_deterministic_newton_raises_at_critical_point():
    with pytest.raises(HitCriticalPoint):
        deterministic_newton(parse_polynomial("z^2 + 1"), 0)


def test_polish_multiple_root_quadratically():
    p = from_roots([0.3, 0.3, 0.3, -0.4])
    x, ok = polish(p, 0.3 + 1e-3, EngineConfig())
    assert ok and abs(x - 0.3) < 1e-5


def test_trace_tail_is_long_and_locked():
    out = run_random_orbit(Z2M1, TAU, 2, (), EngineConfig(trace=True), 0)
    assert out.converged and out.multiplicity == 1
    assert len(out.locked_trace) >= 50
    assert out.log_distance_trace[0] == pytest.approx(math.log(2 / math.sqrt(10)))


def test_rate_bound_on_traced_runs():
    chi = lyapunov_fixed_point(TAU, RelaxedNewton(Z2M1), 1).value
    bound = math.log(math.exp(chi) + 0.05) + 0.1
    cfg = EngineConfig(trace=True)
    ok = 0
    for k in range(500):
        out = run_random_orbit(Z2M1, TAU, 2, (), cfg, k)
        slope, _ = empirical_rate(out.locked_trace)
        ok += slope <= bound
    assert ok >= 475


@pytest.mark.parametrize("kwargs", [dict(max_iterations=0), dict(root_capture_radius=0), dict(escape_radius=-1)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        EngineConfig(**kwargs)
