"""Random relaxed Newton root finding and random-dynamics diagnostics."""

__version__ = "0.1.0"

from .errors import (
    HitCriticalPoint,
    IncompleteFactorization,
    NoFiniteInvariantSet,
    NotFixedPoint,
    RemainderTooLarge,
    StochNewtonError,
    TraceTooShort,
    UnsupportedKind,
    ZeroLyapunov,
)
from .poly import Polynomial, RootRecord, deflate, normalize, parse_polynomial
from .measure import FamilyMeasure, FiniteSupport, UniformAnnulus, UniformDisk, log_potential
from .newton_engine import (
    EngineConfig,
    OrbitOutcome,
    Status,
    deterministic_newton,
    find_all_roots,
    newton_map,
    run_random_orbit,
)
from .families import EmbeddedMarkov, Quadratic, RelaxedNewton, Rotation
from .dynamics import (
    Classification,
    MinimalSetReport,
    classify_minimal_set,
    classify_quadratic_measure,
    lyapunov_fixed_point,
    markov_decompose,
)
from .montecarlo import BasinGrid, estimate_T, estimate_transition_operator, empirical_rate, render_basin
