"""Exception types raised by the library."""


class PolyfluctError(Exception):
    """Base class for all library errors."""


class NonConvergent(PolyfluctError, ArithmeticError):
    """Quadrature did not reach the requested tolerance."""


class DomainViolation(PolyfluctError, ValueError):
    """A subunit extension lies outside the coordinate domain."""


class GridTooCoarse(PolyfluctError, ValueError):
    """Probability mass leaks outside the supplied grid."""


class OutOfRange(PolyfluctError, ValueError):
    """Extensions fall outside the bin range of an empirical measure."""

    def __init__(self, values):
        self.values = list(values)
        shown = ", ".join(f"{v:.6g}" for v in self.values[:10])
        more = "" if len(self.values) <= 10 else f" (+{len(self.values) - 10} more)"
        super().__init__(f"{len(self.values)} extension(s) outside bin range: {shown}{more}")


class LengthMismatch(PolyfluctError, ValueError):
    pass


class NonIntegerCounts(PolyfluctError, ValueError):
    pass


class StabilityViolation(PolyfluctError, ValueError):
    """Time step exceeds the explicit scheme's stability bound."""

    def __init__(self, dt, bound):
        self.dt = dt
        self.bound = bound
        self.suggested_dt = 0.9 * bound
        super().__init__(
            f"dt={dt:.6g} exceeds stability bound {bound:.6g}; "
            f"suggested dt={self.suggested_dt:.6g}"
        )


class NegativeDensity(PolyfluctError, ArithmeticError):
    pass


class AbsoluteContinuityViolation(PolyfluctError, ValueError):
    pass


class ZeroDensityInterior(PolyfluctError, ValueError):
    pass


class ConfigError(PolyfluctError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
