"""Error hierarchy. Every error knows the CLI exit code it maps to."""


class WindflexError(Exception):
    exit_code = 1


class DataValidationError(WindflexError):
    exit_code = 2


class ConfigError(DataValidationError):
    pass


class SolverError(WindflexError):
    exit_code = 3


class InfeasibleError(SolverError):
    exit_code = 4

    def __init__(self, message: str, conflict: list[str] | None = None):
        super().__init__(message)
        self.conflict = list(conflict or [])


class StageError(WindflexError):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
