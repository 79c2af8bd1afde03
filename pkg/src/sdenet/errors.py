"""Exception types. Each carries a short machine-readable ``code``."""


class SdenetError(ValueError):
    code = "error"


class NotStableError(SdenetError):
    code = "not-stable"


class NotContractiveError(SdenetError):
    code = "not-contractive"


class BadSubsamplingError(SdenetError):
    code = "bad-subsampling"


class NoInnerResolutionError(SdenetError):
    code = "no-inner-resolution"


class NeedsGroundTruthError(SdenetError):
    code = "needs-ground-truth"


class OutOfRegimeError(SdenetError):
    code = "out-of-regime"


class TooLargeError(SdenetError):
    code = "too-large"


class SolverError(SdenetError):
    """Raised when a linear-equation solve misses its residual tolerance."""

    code = "solver-residual"

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
