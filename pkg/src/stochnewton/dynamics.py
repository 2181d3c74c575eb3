"""Lyapunov exponents, Markov decomposition of finite minimal sets, and
minimal-set classification.

A superattracting direction gives a Lyapunov exponent of ``-math.inf``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import NotFixedPoint, UnsupportedKind, ZeroLyapunov
from .families import GeneratorFamily, Quadratic, RelaxedNewton
from .measure import FamilyMeasure, FiniteSupport, LambdaMeasure, UniformDisk, log_potential
from .sphere import INF, chordal, is_inf, point_to_json

__all__ = [
    "Classification",
    "LyapunovEstimate",
    "MinimalSetReport",
    "QuadraticClassification",
    "lyapunov_fixed_point",
    "markov_decompose",
    "classify_minimal_set",
    "classify_quadratic_measure",
    "cycle_mean_bounds",
    "as_family_measure",
]


class Classification(str, enum.Enum):
    ATTRACTING = "attracting"
    EXPANDING = "expanding"
    MIXED = "mixed"
    SUPERATTRACTING_PRESENT = "superattracting_present"


class LyapunovEstimate(NamedTuple):
    value: float
    stderr: float
    method: str


@dataclass
class MinimalSetReport:
    indices: list[int]
    points: list[complex]
    period: int
    cyclic_classes: list[list[int]]  # positions into ``points``
    stationary_measures: list[np.ndarray]  # one vector per cyclic class, aligned with it
    lyapunov: float = math.nan
    classification: Classification | None = None

    @property
    def canonical_measure(self) -> np.ndarray:
        """Average of the cyclic-class stationary measures, as a vector over ``points``."""
        w = np.zeros(len(self.points))
        for cls, omega in zip(self.cyclic_classes, self.stationary_measures):
            w[cls] += omega / self.period
        return w

    def to_json(self) -> dict:
        return {
            "points": [point_to_json(z) for z in self.points],
            "period": self.period,
            "cyclic_classes": self.cyclic_classes,
            "stationary_measures": [list(map(float, w)) for w in self.stationary_measures],
            "lyapunov": _json_float(self.lyapunov),
            "classification": self.classification.value if self.classification else None,
        }


def _json_float(x: float):
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return float(x)


def as_family_measure(measure) -> FamilyMeasure:
    if isinstance(measure, FamilyMeasure):
        return measure
    if isinstance(measure, FiniteSupport):
        return measure.to_family()
    raise UnsupportedKind(f"{type(measure).__name__} is not finitely supported")


def _safe_log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


# -- Lyapunov exponent at a common fixed point -------------------------------


def _point_index(family: GeneratorFamily, x: complex) -> int:
    pts = family.points()
    for i, p in enumerate(pts):
        if is_inf(x) or is_inf(p):
            if is_inf(x) and is_inf(p):
                return i
        elif abs(p - x) <= 1e-8 * (1 + abs(x)):
            return i
    raise NotFixedPoint(f"{x!r} is not in the invariant set of {family.name}")


def lyapunov_fixed_point(
    tau, family: GeneratorFamily, x: complex, m: int | None = None, samples: int = 100_000
) -> LyapunovEstimate:
    """Lyapunov exponent of the singleton minimal set {x}.

    Closed form for the relaxed Newton family under a uniform disk measure;
    an exact finite sum for finitely supported measures; otherwise a Monte
    Carlo mean over ``samples`` draws with its standard error.
    """
    if isinstance(family, RelaxedNewton) and isinstance(tau, LambdaMeasure):
        d = family.g.degree
        if not is_inf(x):
            g = family.g
            if abs(g(x)) > 1e-8 * g.scale(x):
                raise NotFixedPoint(f"{x!r} is not a root of g")
            if m is None:
                m = family.multiplicities[_point_index(family, x)]
            mult = lambda lam: abs(1 - lam / m)  # noqa: E731
        else:
            mult = lambda lam: 1.0 / abs(1 - lam / d)  # noqa: E731
        if isinstance(tau, UniformDisk):
            if is_inf(x):
                return LyapunovEstimate(math.log(d) - log_potential(tau, d), 0.0, "closed-form")
            return LyapunovEstimate(log_potential(tau, m) - math.log(m), 0.0, "closed-form")
        if isinstance(tau, FiniteSupport):
            val = sum(p * _safe_log(mult(lam)) for lam, p in tau.atoms)
            return LyapunovEstimate(val, 0.0, "finite-sum")
        lams = tau.stream(0).sample_many(samples)
        if is_inf(x):
            logs = -np.log(np.abs(1 - lams / d))
        else:
            logs = np.log(np.abs(1 - lams / m))
        return LyapunovEstimate(float(logs.mean()), float(logs.std(ddof=1) / math.sqrt(samples)), "monte-carlo")

    fm = as_family_measure(tau)
    i = _point_index(family, x)
    for b, lam, _ in fm.atoms:
        if family.transition(b, lam, i) != i:
            raise NotFixedPoint(f"{x!r} is not fixed by generator ({b}, {lam})")
    val = sum(p * _safe_log(family.point_multiplier(b, lam, i)) for b, lam, p in fm.atoms)
    return LyapunovEstimate(val, 0.0, "finite-sum")


# -- finite Markov chain on the invariant set --------------------------------


def transition_matrix(family: GeneratorFamily, fm: FamilyMeasure) -> np.ndarray:
    n = len(family.points())
    P = np.zeros((n, n))
    for b, lam, p in fm.atoms:
        for i in range(n):
            P[i, family.transition(b, lam, i)] += p
    return P


def _closed_classes(P: np.ndarray) -> list[list[int]]:
    adj = P > 0
    _, labels = connected_components(adj, directed=True, connection="strong")
    out = []
    for lab in sorted(set(labels), key=lambda l: int(np.flatnonzero(labels == l)[0])):
        members = np.flatnonzero(labels == lab)
        outside = np.setdiff1d(np.arange(len(P)), members)
        if not adj[np.ix_(members, outside)].any():
            out.append([int(v) for v in members])
    return out


def _period_and_levels(P: np.ndarray, cls: list[int]) -> tuple[int, dict[int, int]]:
    base = cls[0]
    level = {base: 0}
    queue = [base]
    members = set(cls)
    for u in queue:
        for v in np.flatnonzero(P[u] > 0):
            v = int(v)
            if v in members and v not in level:
                level[v] = level[u] + 1
                queue.append(v)
    g = 0
    for u in cls:
        for v in np.flatnonzero(P[u] > 0):
            v = int(v)
            if v in members:
                g = math.gcd(g, level[u] + 1 - level[v])
    return abs(g) or 1, level


def _stationary(A: np.ndarray) -> np.ndarray:
    """Unique probability vector with pi A = pi for an irreducible stochastic A."""
    k = len(A)
    M = np.vstack([A.T - np.eye(k), np.ones((1, k))])
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    pi = np.clip(pi, 0, None)
    return pi / pi.sum()


def markov_decompose(family: GeneratorFamily, tau) -> list[MinimalSetReport]:
    """Minimal sets of the finite chain induced on the family's invariant points.

    Each report carries the period (gcd of cycle lengths via BFS levels), the
    cyclic classes, one stationary measure per class and the Lyapunov
    exponent against the canonical ergodic measure.
    """
    if isinstance(family, RelaxedNewton) and isinstance(tau, UniformDisk):
        return _newton_disk_reports(family, tau)
    fm = as_family_measure(tau)
    pts = family.points()
    P = transition_matrix(family, fm)
    reports = []
    for cls in _closed_classes(P):
        period, level = _period_and_levels(P, cls)
        pos = {v: k for k, v in enumerate(cls)}
        classes = [[pos[v] for v in cls if level[v] % period == k] for k in range(period)]
        sub = P[np.ix_(cls, cls)]
        Pp = np.linalg.matrix_power(sub, period)
        first = classes[0]
        omegas = [_stationary(Pp[np.ix_(first, first)])]
        for k in range(1, period):
            full = np.zeros(len(cls))
            full[classes[k - 1]] = omegas[-1]
            nxt = full @ sub
            omegas.append(nxt[classes[k]])
        rep = MinimalSetReport(
            indices=list(cls),
            points=[pts[v] for v in cls],
            period=period,
            cyclic_classes=classes,
            stationary_measures=omegas,
        )
        rep.lyapunov = _chi(family, fm, rep)
        rep.classification = classify_minimal_set(rep, family, fm)
        reports.append(rep)
    return reports


def _chi(family, fm: FamilyMeasure, rep: MinimalSetReport) -> float:
    w = rep.canonical_measure
    total = 0.0
    for pos, v in enumerate(rep.indices):
        if w[pos] == 0:
            continue
        for b, lam, p in fm.atoms:
            lg = _safe_log(family.point_multiplier(b, lam, v))
            if lg == -math.inf:
                return -math.inf
            total += w[pos] * p * lg
    return total


def _newton_disk_reports(family: RelaxedNewton, tau: UniformDisk) -> list[MinimalSetReport]:
    reports = []
    pts = family.points()
    for i, x in enumerate(pts):
        rep = MinimalSetReport([i], [x], 1, [[0]], [np.ones(1)])
        rep.lyapunov = lyapunov_fixed_point(tau, family, x).value
        rep.classification = classify_minimal_set(rep, family, tau)
        reports.append(rep)
    return reports


# -- classification by cycle multipliers -------------------------------------


def _karp_max_mean(n: int, edges: list[tuple[int, int, float]]) -> float:
    """Maximum mean weight over directed cycles of a strongly connected graph."""
    D = np.full((n + 1, n), -np.inf)
    D[0, 0] = 0.0
    for k in range(1, n + 1):
        for u, v, w in edges:
            if D[k - 1, u] > -np.inf:
                cand = D[k - 1, u] + w
                if cand > D[k, v]:
                    D[k, v] = cand
    best = -np.inf
    for v in range(n):
        if D[n, v] == -np.inf:
            continue
        worst = np.inf
        for k in range(n):
            if D[k, v] > -np.inf:
                worst = min(worst, (D[n, v] - D[k, v]) / (n - k))
        best = max(best, worst)
    return best


def cycle_mean_bounds(n: int, edges: list[tuple[int, int, float, float]]) -> tuple[float, float]:
    """Max and min mean log-multiplier over all cycles and generator labels.

    ``edges`` holds ``(u, v, max_log, min_log)``; since a label can be chosen
    independently on every edge, the extremes over labellings are attained
    by the per-edge extremes.
    """
    hi = _karp_max_mean(n, [(u, v, a) for u, v, a, _ in edges])
    neg = [(u, v, -b) for u, v, _, b in edges]
    if any(w == np.inf for *_, w in neg):
        lo = -np.inf
    else:
        lo = -_karp_max_mean(n, neg)
    return hi, lo


def classify_minimal_set(report: MinimalSetReport, family: GeneratorFamily, tau) -> Classification:
    """Attracting if every cycle multiplier over every labelling is below 1,
    expanding if every one exceeds 1; otherwise superattracting-present when a
    generator has zero derivative on the set, else mixed."""
    if isinstance(family, RelaxedNewton) and isinstance(tau, UniformDisk):
        (i,) = report.indices
        c, r = tau.center, tau.radius
        if i == len(family.roots):
            d = family.g.degree
            lo, hi = d / (abs(d - c) + r), d / max(abs(d - c) - r, 0.0)
        else:
            mm = family.multiplicities[i]
            lo, hi = max(abs(mm - c) - r, 0.0) / mm, (abs(mm - c) + r) / mm
        return _verdict(_safe_log(hi), _safe_log(lo), lo == 0)

    fm = as_family_measure(tau)
    local = {v: k for k, v in enumerate(report.indices)}
    per_edge: dict[tuple[int, int], list[float]] = {}
    zero = False
    for v in report.indices:
        for b, lam, _ in fm.atoms:
            t = family.transition(b, lam, v)
            lg = _safe_log(family.point_multiplier(b, lam, v))
            zero |= lg == -math.inf
            per_edge.setdefault((local[v], local[t]), []).append(lg)
    edges = [(u, v, max(ws), min(ws)) for (u, v), ws in per_edge.items()]
    hi, lo = cycle_mean_bounds(len(report.indices), edges)
    return _verdict(hi, lo, zero)


def _verdict(hi: float, lo: float, zero: bool) -> Classification:
    if hi < 0:
        return Classification.ATTRACTING
    if lo > 0:
        return Classification.EXPANDING
    if zero:
        return Classification.SUPERATTRACTING_PRESENT
    return Classification.MIXED


# -- quadratic family types ----------------------------------------------------


@dataclass
class QuadraticClassification:
    type: str
    base_type: str
    lyapunov: float
    stderr: float
    ii_probe_hit: bool
    probe_points: list[complex] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "type": self.type,
            "base_type": self.base_type,
            "lyapunov_at_0": _json_float(self.lyapunov),
            "stderr": self.stderr,
            "ii_probe_hit": self.ii_probe_hit,
        }


def _quadratic_probe(fm_or_disk, starts: int = 50, per_start: int = 20, steps: int = 400, tail: int = 50) -> list[complex]:
    """Look for orbits that stay bounded away from both 0 and infinity."""
    fam = Quadratic()
    side = int(math.ceil(math.sqrt(starts)))
    grid = [complex(-1 + 3 * (i + 0.5) / side, -1.5 + 3 * (j + 0.5) / side) for i in range(side) for j in range(side)]
    hits = []
    run = 0
    for z0 in grid[:starts]:
        for _ in range(per_start):
            stream = fm_or_disk.stream(run)
            run += 1
            z = z0
            ok = True
            for k in range(steps):
                draw = stream.sample()
                b, lam = draw if isinstance(draw, tuple) else (0, draw)
                z = fam.step(b, lam, z)
                # settled onto 0 or infinity: not a separate attractor
                if is_inf(z) or chordal(z, 0) < 1e-8 or chordal(z, INF) < 1e-8:
                    ok = False
                    break
                if k >= steps - tail and (chordal(z, 0) <= 0.05 or chordal(z, INF) <= 0.05):
                    ok = False
                    break
            if ok:
                hits.append(z)
    return hits


def classify_quadratic_measure(tau, probe: bool = True) -> QuadraticClassification:
    """Type Ia / Ib / Ic of a measure on the quadratic family lam z (1 - z).

    Ia when every generator contracts at 0; otherwise by the sign of the
    Lyapunov exponent at 0. The optional orbit probe flags a possible type
    II attractor, reported as ``"II-candidate"``.
    """
    if isinstance(tau, UniformDisk):
        sup = abs(tau.center) + tau.radius
        chi = log_potential(tau, 0)
    else:
        fm = as_family_measure(tau)
        sup = max(abs(lam) for _, lam, _ in fm.atoms)
        chi = sum(p * _safe_log(abs(lam)) for _, lam, p in fm.atoms)
        tau = fm
    if sup < 1:
        base = "Ia"
    elif abs(chi) <= 1e-12:
        raise ZeroLyapunov("Lyapunov exponent at 0 is zero; type undetermined")
    else:
        base = "Ib" if chi < 0 else "Ic"
    hits = _quadratic_probe(tau) if probe else []
    return QuadraticClassification("II-candidate" if hits else base, base, chi, 0.0, bool(hits), hits[:10])
