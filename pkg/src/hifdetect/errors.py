"""Exception hierarchy shared by every stage of the pipeline."""


class HifError(Exception):
    """Base class for all pipeline errors."""


class ConfigurationError(HifError, ValueError):
    """Invalid parameters, configuration files or incompatible settings."""


class InsufficientDataError(HifError, ValueError):
    pass


class ShapeError(HifError, ValueError):
    pass


class InvalidInputError(HifError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class DegenerateDataError(HifError, ArithmeticError):
    pass


class TrainingDivergenceError(HifError, ArithmeticError):
    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training diverged (non-finite loss) in epoch {epoch}")


class ModelFileError(HifError, ValueError):
    """A persisted model file is malformed or violates a model invariant."""
