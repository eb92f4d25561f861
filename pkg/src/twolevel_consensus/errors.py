"""Exception hierarchy shared by every module of the package."""


class ConsensusError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(ConsensusError, ValueError):
    pass


class SingularSystem(ConsensusError):
    """The regulator equations have no solution (zero at the origin)."""


class Uncontrollable(ConsensusError):
    pass


class Unobservable(ConsensusError):
    pass


class NotHurwitz(ConsensusError):
    pass


class CertificateInvalid(ConsensusError):
    pass


class NonFinite(ConsensusError, FloatingPointError):
    """A simulated state component became inf or nan."""


class InvalidScenario(ConsensusError, ValueError):
    pass


class ParseError(InvalidScenario):
    """Malformed scenario file (bad JSON, missing or mistyped field)."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ValidationError(InvalidScenario):
    """A scenario parsed but violates a standing assumption.

    ``failures`` is a list of ``(check, message)`` pairs, where ``check`` is
    one of ``minimality``, ``origin_zero``, ``connectivity``, ``balance``,
    ``grid_alignment``, ``certificate`` or ``dimensions``.
    """

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("; ".join(f"[{c}] {m}" for c, m in self.failures))

    @property
    def checks(self):
        return [c for c, _ in self.failures]
