"""Exception hierarchy shared by all mecbench components."""


class MecbenchError(Exception):
    """Base class; ``code`` is the machine-readable reason sent over the wire."""

    code = "MecbenchError"


# registry
class InvalidDescriptor(MecbenchError):
    code = "InvalidDescriptor"

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DuplicateName(MecbenchError):
    code = "DuplicateName"


class UnknownService(MecbenchError):
    code = "UnknownService"


class RegistryUnreachable(MecbenchError):
    code = "RegistryUnreachable"


# vision
class MalformedImage(MecbenchError):
    code = "MalformedImage"


class UnsupportedEncoding(MecbenchError):
    code = "UnsupportedEncoding"


class CalibrationUnstable(MecbenchError):
    code = "CalibrationUnstable"


# offload app
class PayloadTooLarge(MecbenchError):
    code = "PayloadTooLarge"


# path emulator
class BindFailed(MecbenchError):
    code = "BindFailed"


class UpstreamUnreachable(MecbenchError):
    code = "UpstreamUnreachable"


# load generator
class EndpointUnreachable(MecbenchError):
    """Raised when a device loop loses its endpoint; ``run`` keeps the partial data."""

    code = "EndpointUnreachable"

    def __init__(self, message: str, run=None):
        super().__init__(message)
        self.run = run


class ProtocolError(MecbenchError):
    code = "ProtocolError"


class ZeroDuration(MecbenchError):
    code = "ZeroDuration"


# metrics
class InsufficientSamples(MecbenchError):
    code = "InsufficientSamples"


class ZeroBaseline(MecbenchError):
    code = "ZeroBaseline"


class MissingScenario(MecbenchError):
    code = "MissingScenario"


# scenario orchestration
class ParseError(MecbenchError):
    code = "ParseError"


class ValidationError(MecbenchError):
    """Carries every violation found, not just the first."""

    code = "ValidationError"

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


class PortInUse(MecbenchError):
    code = "PortInUse"


class HealthCheckTimeout(MecbenchError):
    code = "HealthCheckTimeout"
