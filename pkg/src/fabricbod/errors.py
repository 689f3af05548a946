"""Domain errors raised by the controller and its subsystems."""


class FabricError(Exception):
    """Base class for every error a command can surface."""

    @property
    def kind(self) -> str:
        return type(self).__name__

    def to_doc(self) -> dict:
        doc = {"kind": self.kind, "message": str(self)}
        reason = getattr(self, "reason", None)
        if reason is not None:
            doc["reason"] = reason
        return doc


# --- topology construction ---

class DuplicateId(FabricError):
    pass


class InvalidSpeed(FabricError):
    pass


class InvalidVlan(FabricError):
    pass


class InvalidLink(FabricError):
    pass


class VfcLimitExceeded(FabricError):
    pass


class TunnelVlanConflict(FabricError):
    pass


class PhysicalPortAlreadyDedicated(FabricError):
    pass


class PortInUse(FabricError):
    pass


class CrossOverlayLink(FabricError):
    pass


class ParseError(FabricError):
    pass


# --- lookups ---

class UnknownDevice(FabricError):
    pass


class UnknownPort(FabricError):
    pass


class UnknownVfc(FabricError):
    pass


class UnknownLink(FabricError):
    pass


class UnknownEndpoint(FabricError):
    pass


class UnknownService(FabricError):
    pass


class UnknownCircuit(FabricError):
    pass


class UnknownReplica(FabricError):
    pass


class UnknownCorrelation(FabricError):
    pass


# --- dataplane ---

class BadRule(FabricError):
    pass


class DanglingMeterRef(FabricError):
    pass


# --- service lifecycle ---

class Rejected(FabricError):
    """Admission rejection; `reason` is "Infeasible" or "BadWindow"."""

    def __init__(self, reason: str, message: str = ""):
        super().__init__(message or reason)
        self.reason = reason


class AlreadyTerminal(FabricError):
    pass


class DuplicateName(FabricError):
    pass


class EndpointBusy(FabricError):
    pass


class WrongState(FabricError):
    pass


# --- cluster ---

class NoQuorum(FabricError):
    pass


# --- api ---

class InvalidArgument(FabricError):
    pass


class NsiUnavailable(FabricError):
    pass
