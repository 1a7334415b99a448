"""Exception types shared across svd_rnd."""


class SvdRndError(Exception):
    """Base class for every error raised by svd_rnd."""

    pass


class InputValidationError(SvdRndError, ValueError):
    """Raised when an input violates an operation's precondition."""

    pass


class ContainerFormatError(InputValidationError):
    """Raised when a tensor container or dataset file is malformed."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class NumericalError(SvdRndError, ArithmeticError):
    """Raised on non-finite values or training divergence."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        if step is not None:
            message = f"{message} (at step {step})"
        super().__init__(message)
