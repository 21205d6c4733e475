"""Exception hierarchy shared by all modules, mapped to CLI exit codes."""

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3


class NlresError(Exception):
    """Base class; `exit_code` drives the command-line status."""

    exit_code = EXIT_NUMERICAL


class ValidationFailure(NlresError):
    """A model or configuration violated a declared invariant."""

    exit_code = EXIT_VALIDATION


class ModelIOError(NlresError):
    """Unreadable, ill-formed or inconsistent on-disk data."""

    exit_code = EXIT_IO


class ConfigError(NlresError):
    """Malformed run configuration or generator recipe."""

    exit_code = EXIT_VALIDATION


class GridMismatchError(NlresError):
    """Operands defined on different spatial grids."""

    exit_code = EXIT_VALIDATION


class FieldEvaluationError(NlresError):
    """Field requested outside its admissible domain."""

    exit_code = EXIT_NUMERICAL


class NumericalError(NlresError):
    """Non-convergent integration, ill-conditioned fit or similar."""

    exit_code = EXIT_NUMERICAL
