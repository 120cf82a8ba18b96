"""Exception types raised across the package."""


class SwrnliError(Exception):
    """Base class for all package errors."""


class ShapeError(SwrnliError, ValueError):
    """Operand shapes are incompatible."""


class ContractError(SwrnliError, ValueError):
    """A documented precondition was violated by the caller."""


class DegenerateRowError(SwrnliError, ValueError):
    """A softmax row has no unmasked entry."""


class DivergenceError(SwrnliError, FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite loss at step {step}")


class FormatError(SwrnliError, ValueError):
    """An input file does not follow its declared format."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedTreeError(FormatError):
    """A dependency head assignment is not a single-rooted tree."""

    def __init__(self, message, sentence_index=None):
        self.sentence_index = sentence_index
        if sentence_index is not None:
            message = f"sentence {sentence_index}: {message}"
        super().__init__(message)


class LabelError(SwrnliError, ValueError):
    """A label falls outside the declared label set."""


class FrozenParserError(SwrnliError, RuntimeError):
    """Syntactic representations were requested from a parser that is not frozen."""


class GenerationError(SwrnliError, ValueError):
    """Probe generation cannot satisfy the requested design."""


class CheckpointError(SwrnliError, IOError):
    """Base class for checkpoint loading failures."""


class CheckpointVersionError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


class ModelKindError(CheckpointError):
    pass
