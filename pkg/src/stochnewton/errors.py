"""Exception types shared across the package."""


class StochNewtonError(Exception):
    """Base class for algorithmic failures (CLI exit code 2)."""


class RemainderTooLarge(StochNewtonError):
    def __init__(self, remainder: complex, bound: float):
        super().__init__(f"deflation remainder {abs(remainder):.3e} exceeds {bound:.3e}")
        self.remainder = remainder
        self.bound = bound


class HitCriticalPoint(StochNewtonError):
    """The orbit reached a point with g'(z) = 0 but g(z) != 0."""

    def __init__(self, z: complex, iterations: int = 0):
        super().__init__(f"critical non-root point reached at {z!r} after {iterations} steps")
        self.z = z
        self.iterations = iterations


class IncompleteFactorization(StochNewtonError):
    def __init__(self, found, degree: int):
        super().__init__(f"found {len(found)} of {degree} roots before the retry budget ran out")
        self.found = found
        self.degree = degree


class UnsupportedKind(StochNewtonError):
    pass


class NotFixedPoint(StochNewtonError):
    pass


class NoFiniteInvariantSet(StochNewtonError):
    pass


class ZeroLyapunov(StochNewtonError):
    """Lyapunov exponent indistinguishable from zero; the measure is unclassifiable."""


class TraceTooShort(StochNewtonError):
    pass
