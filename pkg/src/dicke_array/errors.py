"""Exception types and the exit codes the command line maps them to."""


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    exit_code = 2

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class ConvergenceError(RuntimeError):
    exit_code = 3

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class FitError(ConvergenceError):
    """Least-squares fit did not converge within its iteration cap."""
