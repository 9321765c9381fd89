"""Exception types shared across the package."""


class MpeSearchError(Exception):
    """Base class for errors raised by this package."""


class ParseError(MpeSearchError):
    """Malformed model or evidence file. Carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ModelError(MpeSearchError):
    """Structurally invalid model (bad scope, table size, etc.)."""


class ContractError(MpeSearchError):
    """An operation was called with arguments that violate its contract."""


class ConfigError(MpeSearchError):
    """Invalid configuration value or combination."""


class SamplingError(MpeSearchError):
    """Sampling could not proceed (e.g. a conditional with zero mass)."""


class WeightFormatError(MpeSearchError):
    """Scorer weight file is malformed, truncated, or inconsistent."""


class EvalError(MpeSearchError):
    """Evaluation bookkeeping failed (missing checkpoint, mismatched runs)."""


class DriftError(MpeSearchError):
    """Random-walk simulation aborted (safety cap exceeded)."""
