"""Exception types raised across the package."""


class LGFlatError(Exception):
    pass


class NonConverged(LGFlatError):
    """Quadrature grid or aperture too coarse for the requested fields."""


class DegenerateMatrix(LGFlatError):
    """Crosstalk matrix (or submatrix) sums to zero."""


class Unachievable(LGFlatError):
    """Target visibility not reached anywhere in the beta range."""


class NonMonotone(LGFlatError):
    """Visibility is not monotone in beta, so bisection cannot be trusted."""


class TooManySubsets(LGFlatError):
    pass


class NotPrime(LGFlatError):
    pass


class DegenerateBasis(LGFlatError):
    """Every outcome of one measurement basis had zero probability."""
