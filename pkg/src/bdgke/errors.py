"""Exception hierarchy shared by every layer of the simulator."""


class GKEError(Exception):
    """Base class for all errors raised by this package."""


class DomainMismatchError(GKEError):
    """Values from two different groups were combined."""


class NonInvertibleError(GKEError, ZeroDivisionError):
    pass


class InvalidParamsError(GKEError, ValueError):
    pass


class ParameterGenerationError(GKEError):
    pass


class StateMachineError(GKEError):
    """An operation was invoked in the wrong protocol phase."""


class IncompleteRoundError(GKEError):
    """A party lacks the inputs needed for its next transition."""

    def __init__(self, party: int, missing: list[int], what: str = "value"):
        self.party = party
        self.missing = sorted(missing)
        super().__init__(f"party {party} is missing {what}s from {self.missing}")


class InvalidSizeError(GKEError, ValueError):
    pass


class ProtocolError(GKEError):
    """A received message is malformed for the receiving party."""


class RoutingError(GKEError):
    pass


class ConfigurationError(GKEError, ValueError):
    pass


class OrderingError(GKEError):
    """The tap needed a value it has not observed yet."""


class ProtocolDeviationError(GKEError):
    """The victim's round-two value does not match the expected relation."""


class PreconditionError(GKEError, ValueError):
    pass


class StuckRunError(GKEError):
    """No deliveries remain but some party cannot advance."""

    def __init__(self, party: int, missing: list[int], stage: str, parties=None):
        self.party = party
        self.missing = sorted(missing)
        self.stage = stage
        self.parties = parties
        super().__init__(
            f"run stuck before {stage}: party {party} is missing inputs from {self.missing}"
        )
