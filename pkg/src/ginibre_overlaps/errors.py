"""Exception types shared across the package."""


class SingularInputError(ArithmeticError):
    """A quantity the formulas divide by is (numerically) zero.

    ``quantity`` names what vanished so callers can report it.
    """

    def __init__(self, quantity: str, detail: str = ""):
        self.quantity = quantity
        msg = f"singular input: {quantity} vanishes"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class InvalidOrderError(ValueError):
    """Polynomial order, matrix size or number of points out of range."""


class IllConditionedSampleError(ArithmeticError):
    """Eigenvector matrix too ill-conditioned for meaningful overlaps."""


class CollisionError(ArithmeticError):
    """SDE step size underflowed while particles were nearly colliding."""
