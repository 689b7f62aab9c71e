"""Exception hierarchy shared by all modules."""


class HypobridgeError(Exception):
    """Base class for every error raised by the package."""


class ModelError(HypobridgeError):
    """The (A, B) pair is malformed or violates the rank condition."""


class NumericError(HypobridgeError):
    """A numerical routine could not produce a trustworthy result."""


class NonSquare(ModelError, ValueError):
    pass


class NonFinite(ModelError, ValueError):
    pass


class ShapeMismatch(ModelError, ValueError):
    pass


class NotControllable(ModelError):
    def __init__(self, rank, dim):
        self.rank = rank
        self.dim = dim
        super().__init__(
            f"rank condition fails: controllability matrix has rank {rank} < d = {dim}"
        )


class Asymmetric(NumericError, ValueError):
    pass


class NotPSD(NumericError):
    pass


class SingularGramian(NumericError):
    pass


class IllConditioned(NumericError):
    def __init__(self, cond, limit):
        self.cond = cond
        self.limit = limit
        super().__init__(f"condition estimate {cond:.3e} exceeds {limit:.1e}")


class BadTimeOrder(HypobridgeError, ValueError):
    pass


class BadGrid(HypobridgeError, ValueError):
    pass


class UnknownPreset(HypobridgeError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown preset"


class UnsupportedDimension(HypobridgeError, ValueError):
    pass


class ModelFileError(ModelError, ValueError):
    """A model file cannot be read as a valid (A, B) pair."""
