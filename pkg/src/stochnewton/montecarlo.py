"""Monte Carlo estimators for convergence probabilities, the transition
operator, empirical contraction rates and basin maps.

Run ``k`` of an estimate always uses the sample stream keyed by
``(seed, run_offset + k)``, so results do not depend on worker count.
"""

from __future__ import annotations

import colorsys
import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .newton_engine import EngineConfig, Status, find_all_roots, run_random_orbit
from .errors import HitCriticalPoint, TraceTooShort
from .families import GeneratorFamily, RelaxedNewton
from .poly import Polynomial, RootRecord
from .sphere import INF, is_inf

__all__ = [
    "TEstimate",
    "BasinGrid",
    "TransitionEstimate",
    "wilson_interval",
    "estimate_T",
    "estimate_transition_operator",
    "empirical_rate",
    "render_basin",
    "bump",
    "coordinate",
    "vanishing_at_infinity",
]


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


@dataclass
class TEstimate:
    """Outcome tallies of ``runs`` random orbits from one start point."""

    roots: list[complex]
    root_counts: list[int]
    escape_count: int
    critical_count: int
    unresolved_count: int
    runs: int

    @property
    def per_root(self) -> list[float]:
        return [c / self.runs for c in self.root_counts]

    @property
    def escape(self) -> float:
        return self.escape_count / self.runs

    @property
    def critical_hit(self) -> float:
        return self.critical_count / self.runs

    @property
    def unresolved(self) -> float:
        return self.unresolved_count / self.runs

    def wilson_interval_95(self) -> dict:
        return {
            "per_root": [wilson_interval(c, self.runs) for c in self.root_counts],
            "escape": wilson_interval(self.escape_count, self.runs),
            "critical_hit": wilson_interval(self.critical_count, self.runs),
            "unresolved": wilson_interval(self.unresolved_count, self.runs),
        }

    def to_json(self) -> dict:
        return {
            "roots": [[r.real, r.imag] for r in self.roots],
            "per_root": self.per_root,
            "escape": self.escape,
            "critical_hit": self.critical_hit,
            "unresolved": self.unresolved,
            "runs": self.runs,
            "wilson_interval_95": self.wilson_interval_95(),
        }


def _root_values(g: Polynomial, tau, roots) -> list[RootRecord]:
    if roots is None:
        return find_all_roots(g, tau)
    return [r if isinstance(r, RootRecord) else RootRecord(complex(r)) for r in roots]


def estimate_T(
    g: Polynomial,
    tau,
    z: complex,
    runs: int,
    cfg: EngineConfig | None = None,
    roots: Sequence | None = None,
    run_offset: int = 0,
) -> TEstimate:
    """Estimate the probability that the random orbit from ``z`` converges to each root.

    Orbits that hit the iteration limit, or converge to a point not matching
    any supplied root, count as unresolved.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    cfg = cfg or EngineConfig()
    recs = _root_values(g, tau, roots)
    counts = [0] * len(recs)
    esc = crit = unres = 0
    for k in range(runs):
        try:
            out = run_random_orbit(g, tau, z, recs, cfg, run_offset + k)
        except HitCriticalPoint:
            crit += 1
            continue
        if out.status is Status.CONVERGED and out.root_index is not None:
            counts[out.root_index] += 1
        elif out.status is Status.ESCAPED:
            esc += 1
        else:
            unres += 1
    return TEstimate([r.value for r in recs], counts, esc, crit, unres, runs)


# -- transition operator -------------------------------------------------------


def bump(center: complex, radius: float = 1e-2) -> Callable[[complex], float]:
    """Continuous tent function equal to 1 at ``center`` and 0 beyond ``radius``."""

    def phi(w):
        if is_inf(w):
            return 0.0
        return max(0.0, 1.0 - abs(w - center) / radius)

    return phi


def coordinate(w) -> complex:
    """The bounded coordinate w / (1 + |w|^2), continuous on the sphere."""
    if is_inf(w):
        return 0j
    return w / (1 + abs(w) ** 2)


def vanishing_at_infinity(w) -> float:
    """1 / (1 + |w|^2), with value 0 at infinity."""
    if is_inf(w):
        return 0.0
    return 1.0 / (1 + abs(w) ** 2)


@dataclass
class TransitionEstimate:
    value: complex
    stderr: float
    n_steps: int
    runs: int
    prediction: complex | None = None

    def to_json(self) -> dict:
        out = {
            "value": [self.value.real, self.value.imag],
            "stderr": self.stderr,
            "n_steps": self.n_steps,
            "runs": self.runs,
        }
        if self.prediction is not None:
            out["prediction"] = [self.prediction.real, self.prediction.imag]
        return out


def _as_family(g_or_family) -> GeneratorFamily:
    if isinstance(g_or_family, GeneratorFamily):
        return g_or_family
    return RelaxedNewton(g_or_family)


def estimate_transition_operator(
    g_or_family,
    tau,
    phi: Callable,
    z: complex,
    n_steps: int,
    runs: int,
    run_offset: int = 0,
    predict: bool = True,
) -> TransitionEstimate:
    """Average of phi over the n-th iterate of ``runs`` random orbits from ``z``.

    For the relaxed Newton family the limit sum over roots of T_x(z) phi(x)
    is estimated from an independent block of run indices and reported as
    ``prediction``.
    """
    fam = _as_family(g_or_family)
    vals = np.empty(runs, dtype=complex)
    for k in range(runs):
        stream = tau.stream(run_offset + k)
        w = complex(z)
        for _ in range(n_steps):
            draw = stream.sample()
            b, lam = draw if isinstance(draw, tuple) else (0, draw)
            w = fam.step(b, lam, w)
            if is_inf(w):
                break
        vals[k] = phi(w)
    value = complex(vals.mean())
    stderr = float(np.sqrt(np.var(vals.real, ddof=1) + np.var(vals.imag, ddof=1)) / math.sqrt(runs)) if runs > 1 else 0.0
    pred = None
    if predict and isinstance(fam, RelaxedNewton):
        recs = [RootRecord(x) for x in fam.roots]
        est = estimate_T(fam.g, tau, z, runs, roots=recs, run_offset=run_offset + runs)
        pred = complex(sum(p * phi(x) for p, x in zip(est.per_root, est.roots)) + est.escape * phi(INF))
    return TransitionEstimate(value, stderr, n_steps, runs, pred)


# -- empirical contraction rate -------------------------------------------------


def empirical_rate(trace: Sequence[float], floor: float = 1e-300, min_length: int = 50) -> tuple[float, float]:
    """Least-squares slope of log-distance against step and its r^2.

    The trace is cut at the first entry at or below ``log(floor)``.
    """
    arr = np.asarray(trace, dtype=float)
    cut = np.flatnonzero(~np.isfinite(arr) | (arr <= math.log(floor)))
    if len(cut):
        arr = arr[: cut[0]]
    if len(arr) < min_length:
        raise TraceTooShort(f"trace has {len(arr)} usable entries, need {min_length}")
    fit = stats.linregress(np.arange(len(arr)), arr)
    return float(fit.slope), float(fit.rvalue**2)


# -- basin maps ----------------------------------------------------------------


@dataclass
class BasinGrid:
    bounds: tuple[float, float, float, float]  # xmin, xmax, ymin, ymax
    resolution: tuple[int, int]  # nx, ny
    runs_per_cell: int
    roots: list[complex]
    argmax: np.ndarray  # (ny, nx), -1 where no run reached a root; row 0 = max imaginary part
    argmax_prob: np.ndarray
    escape_prob: np.ndarray
    unresolved_prob: np.ndarray
    metadata: dict = field(default_factory=dict)
    per_root: np.ndarray | None = None  # (ny, nx, k) when requested

    def cell_center(self, i: int, j: int) -> complex:
        xmin, xmax, ymin, ymax = self.bounds
        nx, ny = self.resolution
        x = xmin + (i + 0.5) * (xmax - xmin) / nx
        y = ymax - (j + 0.5) * (ymax - ymin) / ny
        return complex(x, y)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["x", "y", "argmax_root_index", "argmax_prob", "escape_prob", "unresolved_prob"]
        if self.per_root is not None:
            header += [f"p_root_{k}" for k in range(len(self.roots))]
        w.writerow(header)
        nx, ny = self.resolution
        for j in range(ny):
            for i in range(nx):
                c = self.cell_center(i, j)
                row = [
                    repr(c.real),
                    repr(c.imag),
                    int(self.argmax[j, i]),
                    repr(float(self.argmax_prob[j, i])),
                    repr(float(self.escape_prob[j, i])),
                    repr(float(self.unresolved_prob[j, i])),
                ]
                if self.per_root is not None:
                    row += [repr(float(p)) for p in self.per_root[j, i]]
                w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def palette(self, levels: int | None = None) -> tuple[list[int], int]:
        k = max(len(self.roots), 1)
        levels = levels or max(1, min(16, 255 // k))
        pal = [0, 0, 0]
        for r in range(k):
            for q in range(levels):
                light = 0.2 + 0.5 * (q + 1) / levels
                rgb = colorsys.hls_to_rgb(r / k, light, 0.85)
                pal += [int(round(255 * c)) for c in rgb]
        pal += [0, 0, 0] * (256 - len(pal) // 3)
        return pal, levels

    def indexed_image(self) -> np.ndarray:
        pal, levels = self.palette()
        q = np.minimum((self.argmax_prob * levels).astype(int), levels - 1)
        idx = 1 + self.argmax * levels + q
        idx = np.where((self.argmax < 0) | (self.argmax_prob <= 0), 0, idx)
        return idx.astype(np.uint8)

    def to_png(self, path) -> None:
        from PIL import Image

        idx = self.indexed_image()
        img = Image.frombytes("P", (idx.shape[1], idx.shape[0]), np.ascontiguousarray(idx).tobytes())
        pal, _ = self.palette()
        img.putpalette(pal)
        img.save(path, format="PNG", optimize=False)


def _basin_rows(args):
    g, tau, cfg, recs, centers, cell_ids, runs = args
    out = []
    for z, cid in zip(centers, cell_ids):
        est = estimate_T(g, tau, z, runs, cfg, recs, run_offset=cid * runs)
        out.append((est.root_counts, est.escape_count, est.unresolved_count + est.critical_count))
    return out


def render_basin(
    g: Polynomial,
    tau,
    bounds: tuple[float, float, float, float] = (-2.0, 2.0, -2.0, 2.0),
    resolution: tuple[int, int] = (64, 64),
    runs_per_cell: int = 20,
    cfg: EngineConfig | None = None,
    roots: Sequence | None = None,
    workers: int = 1,
    keep_per_root: bool = False,
) -> BasinGrid:
    """Estimate convergence probabilities on a grid of cell centres.

    Cell ``(i, j)`` (row ``j`` counted from the top) uses run indices
    ``(j * nx + i) * runs_per_cell + r``. Critical hits are folded into the
    unresolved column of the reduced grid.
    """
    nx, ny = resolution
    if runs_per_cell < 1:
        raise ValueError("runs_per_cell must be >= 1")
    if not (1 <= nx <= 2048 and 1 <= ny <= 2048):
        raise ValueError("resolution must be between 1 and 2048 per axis")
    xmin, xmax, ymin, ymax = bounds
    if not (xmin < xmax and ymin < ymax):
        raise ValueError("empty bounds")
    cfg = cfg or EngineConfig()
    recs = _root_values(g, tau, roots)
    grid = BasinGrid(
        bounds=(xmin, xmax, ymin, ymax),
        resolution=(nx, ny),
        runs_per_cell=runs_per_cell,
        roots=[r.value for r in recs],
        argmax=np.full((ny, nx), -1, dtype=int),
        argmax_prob=np.zeros((ny, nx)),
        escape_prob=np.zeros((ny, nx)),
        unresolved_prob=np.zeros((ny, nx)),
    )
    tasks = []
    for j in range(ny):
        centers = [grid.cell_center(i, j) for i in range(nx)]
        tasks.append((g, tau, cfg, recs, centers, [j * nx + i for i in range(nx)], runs_per_cell))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_basin_rows, tasks))
    else:
        rows = [_basin_rows(t) for t in tasks]
    full = np.zeros((ny, nx, len(recs))) if keep_per_root else None
    for j, row in enumerate(rows):
        for i, (counts, esc, unres) in enumerate(row):
            probs = np.array(counts, dtype=float) / runs_per_cell
            if len(probs) and probs.max() > 0:
                k = int(np.argmax(probs))
                grid.argmax[j, i] = k
                grid.argmax_prob[j, i] = probs[k]
            grid.escape_prob[j, i] = esc / runs_per_cell
            grid.unresolved_prob[j, i] = unres / runs_per_cell
            if full is not None:
                full[j, i] = probs
    grid.per_root = full
    seed = getattr(tau, "seed", None)
    grid.metadata = {
        "measure": tau.to_json() if hasattr(tau, "to_json") else repr(tau),
        "seed": seed,
        "poly_digest": g.digest(),
        "runs_per_cell": runs_per_cell,
    }
    return grid
