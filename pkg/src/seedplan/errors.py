"""Exception types. Every error carries a short machine-readable ``code``."""


class SeedplanError(ValueError):
    code = "ERROR"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ZeroUploadError(SeedplanError):
    code = "ZERO_UPLOAD"


class SetTooLargeError(SeedplanError):
    code = "SET_TOO_LARGE"


class NotHomogeneousError(SeedplanError):
    code = "NOT_HOMOGENEOUS"


class GranularityError(SeedplanError):
    code = "GRANULARITY"


class PreconditionError(SeedplanError):
    """Raised when a builder's admissibility condition does not hold."""

    code = "PRECONDITION"


class RootingError(SeedplanError):
    code = "ROOTING_FAILED"


class CapacityError(SeedplanError):
    code = "SERVER_CAPACITY"


class NegativeRadicandError(SeedplanError):
    code = "NEGATIVE_RADICAND"


class TooLargeError(SeedplanError):
    code = "TOO_LARGE"


class ParseError(SeedplanError):
    code = "PARSE"


class NoSolutionError(SeedplanError):
    code = "NO_SOLUTION"
