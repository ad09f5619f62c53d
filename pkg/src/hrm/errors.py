"""Exception types shared across the package."""


class HRMError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(HRMError):
    """An argument violates a documented precondition."""


class InvalidComponents(HRMError):
    """Requested latent component count exceeds what the data supports."""


class DegenerateFit(HRMError):
    """The regression problem is numerically degenerate."""


class OutOfBounds(HRMError):
    """A patch or coordinate falls outside the image."""


class InvalidDataset(HRMError):
    """The dataset cannot supply the requested training samples."""


class ZeroSupport(HRMError):
    """A density estimate has no weight to normalize by."""


class ParseError(HRMError):
    """A text input file is malformed."""


class MissingAsset(HRMError):
    """A referenced file does not exist."""


class IncompatibleModel(HRMError):
    """A model file was produced by an incompatible version."""


class CorruptModel(HRMError):
    """A model file is truncated or fails integrity checks."""


class InvalidSpec(HRMError):
    """A synthetic scene specification is unsatisfiable."""
