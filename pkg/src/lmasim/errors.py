"""Exception hierarchy shared by all lmasim modules."""


class LmaSimError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(LmaSimError):
    """Array shapes or bit-vector lengths do not match the operation's contract."""


class InfeasibleDimensionError(LmaSimError):
    """System dimensions violate the feasibility constraints of the chosen mode."""

    def __init__(self, message, violated=()):
        super().__init__(message)
        self.violated = list(violated)


class NumericalError(LmaSimError):
    """A numerical routine failed to converge; carries the offending dimensions."""

    def __init__(self, message, shape=None):
        super().__init__(message)
        self.shape = shape


class ConstructionError(LmaSimError):
    """Codebook construction could not produce a valid codeword set."""


class DegenerateSignalError(LmaSimError):
    """A signal with (near-)zero norm cannot be normalized to the target power."""


class TrainingError(LmaSimError):
    """Training diverged (non-finite loss or gradients); carries the epoch index."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ConfigError(LmaSimError):
    """Run configuration is malformed, has unknown keys, or fails validation."""


class CheckpointError(LmaSimError):
    """A model checkpoint is malformed or does not match the target system."""
