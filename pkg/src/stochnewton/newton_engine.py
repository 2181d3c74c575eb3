"""Random relaxed Newton iteration, root finding by deflation, and the
deterministic Newton baseline with cycle detection."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .errors import HitCriticalPoint, IncompleteFactorization, RemainderTooLarge
from .measure import LambdaMeasure
from .poly import (
    Polynomial,
    RootRecord,
    cauchy_bound,
    deflate,
    evaluate_derivatives,
    evaluate_with_derivative,
    estimate_multiplicity,
    normalize,
)
from .sphere import chordal

__all__ = [
    "Status",
    "OrbitOutcome",
    "EngineConfig",
    "newton_map",
    "polish",
    "run_random_orbit",
    "find_all_roots",
    "deterministic_newton",
]

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    CONVERGED = "converged"
    ESCAPED = "escaped"
    MAX_ITERATIONS = "max_iterations"
    CYCLE = "cycle"


@dataclass
class OrbitOutcome:
    status: Status
    iterations: int
    final_z: complex
    root_index: int | None = None
    cycle_length: int | None = None
    multiplicity: int | None = None
    log_distance_trace: list[float] | None = None
    lock_index: int | None = None

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def locked_trace(self) -> list[float] | None:
        """The part of the trace recorded after the orbit locked onto its root."""
        if self.log_distance_trace is None:
            return None
        return self.log_distance_trace[self.lock_index or 0 :]


@dataclass(frozen=True)
class EngineConfig:
    max_iterations: int = 1000
    escape_radius: float | None = None  # default: 4 x Cauchy bound of the working polynomial
    escape_patience: int = 5  # consecutive outward steps beyond escape_radius
    root_capture_radius: float = 1e-6
    residual_tolerance: float = 1e-10
    derivative_tolerance: float = 1e-13
    polish_steps: int = 4
    retry_budget: int = 16
    trace: bool = False
    trace_steps: int = 100
    cycle_tolerance: float = 1e-9

    def __post_init__(self):
        if self.max_iterations < 1 or self.polish_steps < 0 or self.retry_budget < 1:
            raise ValueError("iteration budgets must be positive")
        if min(self.root_capture_radius, self.residual_tolerance, self.derivative_tolerance) <= 0:
            raise ValueError("tolerances must be positive")
        if self.escape_radius is not None and self.escape_radius <= 0:
            raise ValueError("escape_radius must be positive")

    def with_(self, **kw) -> "EngineConfig":
        return replace(self, **kw)


class _Kernel:
    """Per-polynomial cached quantities used inside the iteration loop."""

    def __init__(self, g: Polynomial, cfg: EngineConfig):
        self.g = g
        self.n = g.degree
        self.abs_coeffs = [abs(c) for c in g.coeffs]
        self.dtol = cfg.derivative_tolerance
        self.rtol = cfg.residual_tolerance
        self._dbound = self.n * max(self.abs_coeffs[1:]) if self.n >= 1 else 0.0

    def value_scale(self, r: float) -> float:
        acc = 0.0
        for c in reversed(self.abs_coeffs):
            acc = acc * r + c
        return acc

    def deriv_scale(self, r: float) -> float:
        acc = 0.0
        cs = self.abs_coeffs
        for k in range(self.n, 0, -1):
            acc = acc * r + k * cs[k]
        return acc

    def is_critical(self, z: complex, dz: complex) -> bool:
        r = abs(z)
        # cheap upper bound on deriv_scale before computing it exactly
        if abs(dz) > self.dtol * self._dbound * (1 + r) ** max(self.n - 1, 0):
            return False
        return abs(dz) <= self.dtol * self.deriv_scale(r)

    def is_root(self, z: complex, gz: complex) -> bool:
        return abs(gz) <= self.rtol * self.value_scale(abs(z))


def newton_map(g: Polynomial, lam: complex, z: complex, cfg: EngineConfig | None = None) -> complex:
    """One relaxed Newton step ``z - lam g(z)/g'(z)``.

    Roots are fixed. Raises :class:`HitCriticalPoint` on the set
    {g' = 0, g != 0}.
    """
    k = _Kernel(g, cfg or EngineConfig())
    gz, dz = evaluate_with_derivative(g, z)
    if k.is_critical(z, dz):
        if k.is_root(z, gz):
            return z
        raise HitCriticalPoint(z)
    if gz == 0:
        return z
    return z - lam * gz / dz


def polish(g: Polynomial, z: complex, cfg: EngineConfig) -> tuple[complex, bool]:
    """Deterministic Newton polishing with a locally estimated multiplicity.

    Each step estimates m from g'^2 / (g'^2 - g g'') and takes the step
    ``z - m g/g'``, which is quadratically convergent at an m-fold root.
    Returns the polished point and whether its relative residual meets
    ``cfg.residual_tolerance``.
    """
    n = g.degree
    for _ in range(cfg.polish_steps):
        gz, dz, d2z = evaluate_derivatives(g, z, 2)
        # at the rounding floor the multiplicity estimate is noise
        if abs(gz) <= 1e-15 * g.scale(z):
            break
        if dz == 0:
            return z, False
        denom = dz * dz - gz * d2z
        m = 1
        if denom != 0:
            ratio = (dz * dz / denom).real
            if math.isfinite(ratio):
                m = min(max(int(round(ratio)), 1), n)
        step = m * gz / dz
        z = z - step
        if abs(step) <= 1e-17 * (1 + abs(z)):
            break
    residual = abs(g(z))
    return z, residual <= cfg.residual_tolerance * g.scale(z)


def _match_root(x: complex, known: Sequence[RootRecord], cfg: EngineConfig) -> int | None:
    if not known:
        return None
    dists = [abs(x - r.value) for r in known]
    i = min(range(len(dists)), key=dists.__getitem__)
    tol = max(1e-5 * (1 + abs(x)), 10 * cfg.root_capture_radius)
    return i if dists[i] <= tol else None


def _local_tail(g: Polynomial, x: complex, w: complex, m: int, stream, steps: int) -> list[float]:
    """Continue the random iteration in the coordinate w = z - x.

    Writing g(x + w) = w^m j(w), the relaxed step becomes
    w -> w (1 - lam j / (m j + w j')), which has no cancellation floor, so
    log-distances keep shrinking far below machine epsilon.
    """
    n = g.degree
    taylor = evaluate_derivatives(g, x, n)
    b = [taylor[k] / math.factorial(k) for k in range(n + 1)]
    j_coeffs = b[m:]
    jp = Polynomial(j_coeffs) if any(c != 0 for c in j_coeffs) else None
    out = []
    if jp is None or w == 0:
        return out
    log_w = math.log(abs(w))
    cx = 1 + abs(x) ** 2
    for _ in range(steps):
        lam = stream.sample()
        jv, jd = evaluate_with_derivative(jp, w)
        den = m * jv + w * jd
        if den == 0:
            break
        factor = 1 - lam * jv / den
        if factor == 0:
            break
        log_w += math.log(abs(factor))
        w = w * factor
        zw = x + w
        out.append(math.log(2) + log_w - 0.5 * math.log((1 + abs(zw) ** 2) * cx))
        if w == 0:
            break
    return out


def run_random_orbit(
    g: Polynomial,
    tau: LambdaMeasure,
    z0: complex,
    known_roots: Sequence[RootRecord] = (),
    cfg: EngineConfig | None = None,
    run_index: int = 0,
) -> OrbitOutcome:
    """Iterate z_{n+1} = N_{g, lambda_n}(z_n) with i.i.d. lambda_n drawn from tau.

    A point within ``root_capture_radius`` of a root (estimated as
    deg(g) |g/g'|) is handed to :func:`polish`; it is accepted once the
    polished residual meets tolerance, otherwise the random iteration
    continues from where it was. Landing on a critical non-root point raises
    :class:`HitCriticalPoint`. With ``cfg.trace`` set, log chordal
    distances to the final root are recorded and the orbit is continued for
    ``cfg.trace_steps`` further random steps in local coordinates.
    """
    cfg = cfg or EngineConfig()
    if g.degree < 1:
        raise ValueError("need a non-constant polynomial")
    z = complex(z0)
    idx = _match_root(z, known_roots, cfg)
    if idx is not None and abs(z - known_roots[idx].value) <= cfg.root_capture_radius:
        return OrbitOutcome(Status.CONVERGED, 0, z, root_index=idx)

    kern = _Kernel(g, cfg)
    n = g.degree
    stream = tau.stream(run_index)
    escape_r = cfg.escape_radius if cfg.escape_radius is not None else 4 * cauchy_bound(g)
    history = [z] if cfg.trace else None
    outside = 0

    for it in range(cfg.max_iterations + 1):
        gz, dz = evaluate_with_derivative(g, z)
        if kern.is_critical(z, dz):
            if not kern.is_root(z, gz):
                raise HitCriticalPoint(z, it)
            x, ok = z, True
            step = 0j
        else:
            step = gz / dz
            x, ok = None, False
            if n * abs(step) <= cfg.root_capture_radius * (1 + abs(z)):
                x, ok = polish(g, z, cfg)
        if ok:
            return _converged(g, x, z, it, known_roots, cfg, stream, history)
        if it == cfg.max_iterations:
            break
        lam = stream.sample()
        prev, z = z, z - lam * step
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            return OrbitOutcome(Status.ESCAPED, it + 1, z)
        if history is not None:
            history.append(z)
        # far out a relaxed step shrinks |z| by about |1 - lam/d|; only outward drift counts
        if abs(z) > escape_r and abs(z) >= abs(prev):
            outside += 1
            if outside >= cfg.escape_patience:
                return OrbitOutcome(Status.ESCAPED, it + 1, z)
        else:
            outside = 0
    return OrbitOutcome(Status.MAX_ITERATIONS, cfg.max_iterations, z)


def _converged(g, x, z, it, known_roots, cfg, stream, history) -> OrbitOutcome:
    idx = _match_root(x, known_roots, cfg)
    out = OrbitOutcome(Status.CONVERGED, it, x, root_index=idx)
    if history is not None:
        m = estimate_multiplicity(g, x)
        out.multiplicity = m
        pre = []
        for zk in history:
            d = chordal(zk, x)
            pre.append(math.log(d) if d > 0 else -math.inf)
        tail = _local_tail(g, x, z - x, m, stream, cfg.trace_steps)
        out.log_distance_trace = pre + tail
        out.lock_index = len(pre)
    return out


def _polish_original(g: Polynomial, x: complex, cfg: EngineConfig) -> tuple[complex, bool]:
    xp, ok = polish(g, x, cfg.with_(polish_steps=max(cfg.polish_steps, 8)))
    # polishing must not wander to a different root of the original
    if abs(xp - x) > 1e-3 * (1 + abs(x)):
        return x, abs(g(x)) <= cfg.residual_tolerance * g.scale(x)
    return xp, ok


def find_all_roots(
    g: Polynomial,
    tau: LambdaMeasure,
    cfg: EngineConfig | None = None,
    z0: complex = 2.0,
) -> list[RootRecord]:
    """All deg(g) roots by random orbits plus synthetic division.

    The polynomial is first rescaled so its roots lie in the unit disk and
    every stage starts from ``z0`` (outside that disk). Stage ``s`` uses
    run indices ``s * retry_budget + attempt``. Each root is polished
    against the original polynomial before the working polynomial is
    deflated.
    """
    cfg = cfg or EngineConfig()
    if g.degree < 1:
        raise ValueError("need a non-constant polynomial")
    h, a = normalize(g)
    work = h
    found: list[complex] = []
    for stage in range(g.degree):
        if work.degree == 1:
            y = -work.coeffs[0] / work.coeffs[1]
        else:
            y = None
            for attempt in range(cfg.retry_budget):
                try:
                    out = run_random_orbit(work, tau, z0, (), cfg, stage * cfg.retry_budget + attempt)
                except HitCriticalPoint:
                    log.debug("stage %d attempt %d hit a critical point", stage, attempt)
                    continue
                if out.converged:
                    y = out.final_z
                    break
                log.debug("stage %d attempt %d ended with %s", stage, attempt, out.status.value)
            if y is None:
                raise IncompleteFactorization(_records(g, found, cfg), g.degree)
        x, _ = _polish_original(g, a * y, cfg)
        found.append(x)
        if work.degree > 1:
            try:
                work = deflate(work, x / a)
            except RemainderTooLarge:
                try:
                    work = deflate(work, y)
                except RemainderTooLarge:
                    raise IncompleteFactorization(_records(g, found, cfg), g.degree) from None
    return _records(g, found, cfg)


def _records(g: Polynomial, xs: Sequence[complex], cfg: EngineConfig) -> list[RootRecord]:
    out = []
    for x in xs:
        res = abs(g(x))
        out.append(
            RootRecord(
                value=x,
                multiplicity_estimate=estimate_multiplicity(g, x),
                residual=res,
                polished=res <= cfg.residual_tolerance * g.scale(x),
            )
        )
    return out


def deterministic_newton(g: Polynomial, z0: complex, cfg: EngineConfig | None = None) -> OrbitOutcome:
    """Classical Newton (lambda = 1) with Brent cycle detection.

    Two iterates are identified when they differ by less than
    ``cfg.cycle_tolerance * (1 + |z|)``.
    """
    cfg = cfg or EngineConfig()
    kern = _Kernel(g, cfg)
    n = g.degree
    tol = cfg.cycle_tolerance

    def step(z):
        gz, dz = evaluate_with_derivative(g, z)
        if kern.is_critical(z, dz):
            if kern.is_root(z, gz):
                return z, 0j
            raise HitCriticalPoint(z)
        return z - gz / dz, gz / dz

    def root_check(z, s, it):
        if n * abs(s) <= cfg.root_capture_radius * (1 + abs(z)):
            x, ok = polish(g, z, cfg)
            if ok:
                return OrbitOutcome(Status.CONVERGED, it, x)
        return None

    tortoise = complex(z0)
    hare, s = step(tortoise)
    if (done := root_check(tortoise, s, 0)) is not None:
        return done
    power = lam = 1
    it = 1
    while it < cfg.max_iterations:
        nxt, s = step(hare)
        if (done := root_check(hare, s, it)) is not None:
            return done
        if abs(hare - tortoise) <= tol * (1 + abs(tortoise)):
            return OrbitOutcome(Status.CYCLE, it, hare, cycle_length=_min_period(step, hare, lam, tol))
        if power == lam:
            tortoise = hare
            power *= 2
            lam = 0
        hare = nxt
        lam += 1
        it += 1
        if not (math.isfinite(hare.real) and math.isfinite(hare.imag)):
            return OrbitOutcome(Status.ESCAPED, it, hare)
    return OrbitOutcome(Status.MAX_ITERATIONS, cfg.max_iterations, hare)


def _min_period(step, z, upper, tol) -> int:
    w = z
    for k in range(1, upper + 1):
        w, _ = step(w)
        if abs(w - z) <= tol * (1 + abs(z)):
            return k
    return upper
