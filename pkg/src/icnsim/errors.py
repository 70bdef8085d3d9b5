"""Exception hierarchy shared across the simulator."""


class IcnSimError(Exception):
    """Base class for every error raised by icnsim."""


class EncodingError(IcnSimError):
    pass


class MalformedPacket(IcnSimError):
    pass


class NotFound(IcnSimError, LookupError):
    pass


class ProtocolError(IcnSimError):
    """A forwarder was driven outside its contract (simulation bug)."""


class SimulationError(IcnSimError):
    """The event engine was misused, e.g. an event scheduled in the past."""


class InvalidTransition(IcnSimError):
    pass


class PreconditionError(IcnSimError):
    pass


class Unsupported(IcnSimError):
    pass


class AlreadyActive(IcnSimError):
    pass


class NamespaceConflict(IcnSimError):
    pass


class Rejected(IcnSimError):
    pass


class ResolutionFailed(IcnSimError):
    pass


class InsufficientResources(IcnSimError):
    def __init__(self, vnf_kind: str, reason: str):
        super().__init__(f"cannot place {vnf_kind}: {reason}")
        self.vnf_kind = vnf_kind
        self.reason = reason


class DiscoveryNotFound(IcnSimError):
    pass


class InvariantViolation(IcnSimError):
    pass


class ScenarioError(IcnSimError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message
