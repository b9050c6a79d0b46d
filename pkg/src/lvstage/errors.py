"""Exception hierarchy.

Everything numerical derives from ``NumericalError`` so the CLI can map it to
exit code 3; malformed input derives from ``ValidationError`` (exit code 2).
"""


class LvstageError(Exception):
    pass


class ValidationError(LvstageError, ValueError):
    pass


class NumericalError(LvstageError, ArithmeticError):
    pass


class ProfileSyntaxError(ValidationError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ProfileSyntaxError):
    pass


class MplusViolation(ValidationError):
    """Growth profile is not strictly positive on the closed domain."""

    def __init__(self, nodes, values):
        self.nodes = list(nodes)
        self.values = list(values)
        shown = ", ".join(f"{i}:{v:.3g}" for i, v in zip(self.nodes[:5], self.values[:5]))
        more = "" if len(self.nodes) <= 5 else f" (+{len(self.nodes) - 5} more)"
        super().__init__(f"profile not strictly positive at nodes {shown}{more}")


class SingularSystemError(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class ExtinctProfile(NumericalError):
    pass


class BracketFailure(NumericalError):
    pass


class CouplingSignError(ValidationError):
    pass


class NotASteadyState(ValidationError):
    pass


class InconsistentSigns(NumericalError):
    pass


class ContinuumCheckFailed(NumericalError):
    pass


class OrderViolation(NumericalError):
    def __init__(self, message: str, t: float | None = None, index: int | None = None):
        super().__init__(message)
        self.t = t
        self.index = index


class PositivityBreach(NumericalError):
    pass


class MismatchedOutcome(NumericalError):
    def __init__(self, message: str, pairs=()):
        super().__init__(message)
        self.pairs = list(pairs)


class ConfigError(ValidationError):
    def __init__(self, key: str, reason: str):
        super().__init__(f"{key}: {reason}")
        self.key = key
        self.reason = reason
