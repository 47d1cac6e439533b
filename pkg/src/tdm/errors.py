"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Incompatible shapes, geometries, or parameter values."""


class NumericalError(ArithmeticError):
    """A solver or sampler produced non-finite values or broke down.

    Carries the iteration/step index at which the failure was detected.
    """

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class TrainingError(RuntimeError):
    """Denoiser training diverged or was misconfigured."""


class VolumeFormatError(ValueError):
    """A volume file failed validation.

    ``offset`` is the byte offset of the offending region, ``field`` the
    header field that failed, when applicable.
    """

    def __init__(self, message, offset=None, field=None):
        parts = [message]
        if field is not None:
            parts.append(f"field={field!r}")
        if offset is not None:
            parts.append(f"byte offset {offset}")
        super().__init__(", ".join(parts))
        self.offset = offset
        self.field = field


class CheckpointFormatError(ValueError):
    """A model checkpoint file failed validation."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
