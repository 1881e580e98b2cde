"""Exception types shared across the machine, backends, and pipeline."""


class OblivLinkError(Exception):
    """Base class for all package errors."""


class ShapeError(OblivLinkError):
    """Operand shapes are incompatible for the requested operation."""


class ContextMismatchError(OblivLinkError):
    """Operands belong to different backend contexts."""


class CapabilityError(OblivLinkError):
    """The backend does not provide a primitive the operation requires."""


class AuthorityError(OblivLinkError):
    """Decryption attempted without a valid decryption authority."""


class TaintViolation(OblivLinkError):
    """A private value's content influenced host control flow or a public
    output without passing through an authorized decryption."""

    def __init__(self, message, operation=None, site=None):
        super().__init__(message)
        self.operation = operation
        self.site = site


class DomainError(OblivLinkError):
    """Value outside the numeric domain an operation requires."""


class StageError(OblivLinkError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
