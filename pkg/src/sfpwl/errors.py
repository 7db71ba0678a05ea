"""Exception hierarchy.

The CLI maps the three top-level families onto exit codes, so every
failure raised by the library belongs to exactly one of them.
"""


class HypothesisViolation(ValueError):
    """A mathematical precondition of a construction does not hold."""


class SingularPhiError(HypothesisViolation):
    """The observability-type matrix Phi is (numerically) singular."""


class ZeroForcingError(HypothesisViolation):
    """The forcing scale s vanishes, so the parameter does not unfold the BEB."""


class NotHurwitzError(HypothesisViolation):
    """A layer matrix has an eigenvalue with non-negative real part."""


class SingularLayerError(HypothesisViolation):
    """A layer matrix is singular (its last coefficient is zero)."""


class SpectralGapError(HypothesisViolation):
    """Fast and slow eigenvalues are too close to split reliably."""


class NumericalFailure(RuntimeError):
    """An algorithm failed for numerical reasons."""


class ConvergenceError(NumericalFailure):
    pass


class StepSizeError(NumericalFailure):
    pass


class DivergenceError(NumericalFailure):
    def __init__(self, message, escape_time=None, state=None):
        super().__init__(message)
        self.escape_time = escape_time
        self.state = state


class VerificationError(NumericalFailure):
    """A post-condition residual exceeded its tolerance."""


class ConfigError(ValueError):
    """A system description is malformed or inconsistent."""


class ContinuityError(ConfigError):
    """Piece matrices differ outside their first column."""
