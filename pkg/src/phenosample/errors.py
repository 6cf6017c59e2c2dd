class PhenoSampleError(Exception):
    """Base class for all package errors."""


class ConfigError(PhenoSampleError, ValueError):
    pass


class MissingPhenologyError(PhenoSampleError):
    pass


class TransportError(PhenoSampleError):
    pass


class DecodeError(PhenoSampleError, ValueError):
    pass


class ValidationError(PhenoSampleError, ValueError):
    """Raised when a manifest breaks one of its invariants.

    ``rule`` is a short machine-friendly name of the violated invariant.
    """

    def __init__(self, rule, message, line=None):
        self.rule = rule
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{rule}: {message}")


class ProbeDivergedError(PhenoSampleError, FloatingPointError):
    def __init__(self, epoch):
        self.epoch = epoch
        super().__init__(f"non-finite loss at epoch {epoch}")
