"""Exception hierarchy shared across the package."""


class CleerError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(CleerError, ValueError):
    """Invalid configuration value (bad kernel size, dilation, flag, ...)."""


class ShapeError(CleerError, ValueError):
    """Tensor/array shapes incompatible with an operation's contract."""


class EmptyInputError(CleerError, ValueError):
    """An operation received an empty input where data is required."""


class DataFormatError(CleerError, ValueError):
    """A serialized container (SEGD, CKPT) failed validation."""


class StratificationError(CleerError, ValueError):
    """Label distribution cannot satisfy the stratified-fold invariant."""


class ContractError(CleerError, RuntimeError):
    """A numeric-contract precondition was violated (missing gradient,
    non-scalar loss, gradient check run outside float64, ...)."""
