"""Exception types shared by the solver modules."""


class TwoWellError(Exception):
    """Base class for all solver errors."""


class NoTwoLevels(TwoWellError):
    """The double well does not support two bound states."""


class RootBracketFailure(TwoWellError):
    """A bisection bracket did not contain a sign change."""


class Overflow(TwoWellError, ArithmeticError):
    """Argument outside the range where a special function is representable."""


class BranchInconsistency(TwoWellError):
    """An oscillatory cell integral violates its modulus bound."""


class InitialValueMismatch(TwoWellError):
    """A source series does not reproduce the initial data at t = 0."""


class DomainTooSmall(TwoWellError):
    """The periodic FFT box is too small for the sampled initial state."""


class DegenerateInitialData(TwoWellError):
    """Initial data vanishes at both wells."""


class NonConvergence(TwoWellError):
    """Fixed-point iteration hit its cap without meeting the tolerance."""


class Blowup(TwoWellError):
    """The charges diverge in finite time.

    ``index`` is the first offending time-grid index (0-based) and
    ``reason`` a short tag describing which guard fired.
    """

    def __init__(self, index: int, reason: str, trajectory=None):
        super().__init__(f"blow-up at step {index}: {reason}")
        self.index = index
        self.reason = reason
        self.trajectory = trajectory


class ConfigError(TwoWellError, ValueError):
    """Invalid scenario or configuration."""
