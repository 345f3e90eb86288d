"""Error types and process exit codes for unmix"""

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4
EXIT_INTERRUPTED = 130


class UnmixError(Exception):
    """Base class for every error raised by unmix"""


class ShapeError(UnmixError, ValueError):
    """Operand shapes are incompatible"""


class DomainError(UnmixError, ValueError):
    """Input lies outside the domain of an operation"""


class IndexRangeError(UnmixError, IndexError):
    """Index outside the valid range"""


class UsageError(UnmixError):
    """Operation called in a mode that does not support it"""


class FactorizationError(UnmixError):
    """Cholesky factorization failed up to the jitter cap"""


class DegenerateSignalError(UnmixError, ValueError):
    """Sequence has zero variance"""


class ConfigError(UnmixError):
    """Invalid configuration value"""

    def __init__(self, key_path: str, message: str):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}")


class TrainingDivergedError(UnmixError):
    """A loss term became NaN or infinite during training"""

    def __init__(self, term: str, epoch: int, value: float):
        self.term = term
        self.epoch = epoch
        self.value = value
        super().__init__(f"non-finite {term} ({value}) at epoch {epoch}")


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code"""
    if isinstance(exc, KeyboardInterrupt):
        return EXIT_INTERRUPTED
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, TrainingDivergedError):
        return EXIT_DIVERGED
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_FAILURE
