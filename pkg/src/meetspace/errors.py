"""Exception types shared across the engine, protocol, and CLI."""


class MeetspaceError(Exception):
    """Base class for all errors raised by this package."""

    code = "Error"

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.code)
        self.detail = detail


class InvalidDimensions(MeetspaceError):
    code = "InvalidDimensions"


class InvalidDisplaySegment(MeetspaceError):
    code = "InvalidDisplaySegment"


class UnknownRoom(MeetspaceError):
    code = "UnknownRoom"


class OutOfRoomBounds(MeetspaceError):
    code = "OutOfRoomBounds"


class ColorCollision(MeetspaceError):
    code = "ColorCollision"


class DuplicateParticipant(MeetspaceError):
    code = "DuplicateParticipant"


class UnknownParticipant(MeetspaceError):
    code = "UnknownParticipant"


class DeviceAlreadyBound(MeetspaceError):
    code = "DeviceAlreadyBound"


class NotModerator(MeetspaceError):
    code = "NotModerator"


class PayloadTooLarge(MeetspaceError):
    code = "PayloadTooLarge"


class MalformedMessage(MeetspaceError):
    code = "MalformedMessage"


class ConfigError(MeetspaceError):
    code = "ConfigError"


class TraceFormatError(MeetspaceError):
    code = "TraceFormatError"


class ScenarioError(MeetspaceError):
    code = "ScenarioError"
