"""Exception types shared across the package."""


class TouchPoseError(Exception):
    """Base class for package errors."""


class ParseError(TouchPoseError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        loc = ""
        if path is not None:
            loc += f"{path}:"
        if line is not None:
            loc += f"{line}: "
        super().__init__(f"{loc}{message}")


class ReconstructionFailed(TouchPoseError):
    """Surface reconstruction could not produce any triangle."""


class RegistrationFailed(TouchPoseError):
    """Pose registration had no usable input."""


class InitializationError(TouchPoseError):
    """Episode reset could not establish contact inside the workspace."""


class ContractViolation(TouchPoseError):
    """An operation was called outside its stated preconditions."""


class ConfigError(TouchPoseError):
    """Bad configuration file or unknown key."""


class CheckpointError(TouchPoseError):
    """Checkpoint version or config digest mismatch."""
