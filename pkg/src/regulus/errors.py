"""Exception hierarchy shared by all modules."""


class RegulusError(Exception):
    """Base class for library errors."""


class SingularInput(RegulusError):
    """Matrix is singular or has non-finite entries."""


class ConvergenceFailure(RegulusError):
    """An iterative kernel did not converge."""


class DimensionMismatch(RegulusError):
    """Operands live in incompatible dimensions."""


class IndexOutOfRange(RegulusError):
    """Root or weight index outside ``1..d-1``."""


class InvalidTheta(RegulusError):
    """Index set is empty, out of range or not symmetric."""


class NoGap(RegulusError):
    """A required singular value gap is not above the floor.

    Attributes
    ----------
    k : int
        1-based index of the missing gap.
    value : float
        The observed gap.
    position : int or None
        Sequence position when raised while scanning a sequence.
    """

    def __init__(self, k, value=float("nan"), position=None):
        self.k = k
        self.value = value
        self.position = position
        where = "" if position is None else f" at position {position}"
        super().__init__(f"no gap of index {k} (gap {value:.3e}){where}")


class ThetaMismatch(RegulusError):
    """Flags are indexed by different sets."""


class Divergent(RegulusError):
    """Flag sequence does not settle.

    Attributes
    ----------
    index : int
        Sequence position where the envelope test failed.
    """

    def __init__(self, index, reason=""):
        self.index = index
        self.reason = reason
        super().__init__(f"flags diverge at index {index}: {reason}")


class EmptyInput(RegulusError):
    """An operation received no data."""


class TooShort(RegulusError):
    """Sequence is shorter than the operation needs."""


class DuplicateElements(RegulusError):
    """Sequence repeats an element."""

    def __init__(self, i, j):
        self.pair = (i, j)
        super().__init__(f"elements {i} and {j} coincide")


class OutsideDomain(RegulusError):
    """Point is not inside the convex domain."""


class NotAutomorphism(RegulusError):
    """Orbit element does not preserve the domain."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"element {index} is not an automorphism of the domain")


class EmptyIntersection(RegulusError):
    """No orbit ball meets the ray."""


class ExplosionGuard(RegulusError):
    """Enumeration exceeded its node cap."""


class NotReduced(RegulusError):
    """Word contains a letter followed by its inverse."""


class ParseError(RegulusError):
    """Input file could not be parsed.

    Attributes
    ----------
    line : int
        1-based line number of the offending record.
    """

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")
