"""Exception types shared across the package."""


class MeshfuzzError(Exception):
    """Base class for all meshfuzz errors."""


class ConfigError(MeshfuzzError):
    """Invalid configuration: bad key, bad value, or mismatched shapes."""


class ProtocolError(MeshfuzzError):
    """Malformed frame or unexpected reply on a collector/target link."""


class ParseError(MeshfuzzError):
    """Corpus file cannot be decoded; carries the offending byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class TargetError(MeshfuzzError):
    """The target deployment failed to start or became unrecoverable."""


class RestartStormError(MeshfuzzError):
    """A component crashed and restarted too often in a short window."""
