"""Exception hierarchy shared by every layer of the engine."""


class VidMPCError(Exception):
    """Base class for all engine errors."""


class EncodingRangeError(VidMPCError, ValueError):
    """A real value does not fit the fixed-point range."""


class IntegrityError(VidMPCError):
    """Replicated components that should agree do not."""


class ShapeError(VidMPCError, ValueError):
    pass


class BudgetExhaustedError(VidMPCError):
    """Preprocessing material ran out; material is never reused."""


class TransportError(VidMPCError):
    pass


class FramingError(TransportError):
    pass


class ProtocolOrderError(TransportError):
    pass


class SessionAborted(TransportError):
    pass


class ContainerFormatError(VidMPCError, ValueError):
    pass
