"""Exception hierarchy shared by every ghostkit module."""


class GhostkitError(Exception):
    pass


class ConfigError(GhostkitError, ValueError):
    """Invalid configuration value (dimensions, bin counts, odd frame counts...)."""


class PreconditionError(GhostkitError, ValueError):
    pass


class ShapeError(GhostkitError, ValueError):
    pass


class InsufficientDataError(GhostkitError, ValueError):
    pass


class MaskFormatError(GhostkitError, ValueError):
    pass


class DegenerateFrameError(GhostkitError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegenerateImageError(GhostkitError):
    pass


class EmptyRegisterError(GhostkitError):
    def __init__(self, side):
        super().__init__(f"register {side} is empty: no frame lies beyond the threshold")
        self.side = side


class InsufficientFramesError(GhostkitError):
    def __init__(self, k, positive, negative):
        super().__init__(
            f"cannot select k={k} frames per side: only {positive} frames above "
            f"and {negative} frames below the mean estimate"
        )
        self.k = k
        self.positive = positive
        self.negative = negative


class MissingFramesError(GhostkitError):
    pass


class StoreFormatError(GhostkitError):
    pass


class StoreCorruptionError(GhostkitError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
