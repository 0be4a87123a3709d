"""Exception and warning hierarchy.

Input problems subclass ``ValueError`` and numerical failures subclass
``ArithmeticError`` so callers that only know the builtins still catch them.
The CLI maps ``InputError`` to exit code 2 and ``NumericalError`` to 3.
"""

from __future__ import annotations

from typing import Any


class SilError(Exception):
    """Base class for every error raised by the toolkit."""


class InputError(SilError, ValueError):
    """Invalid user input: configs, files, parameters or data shapes."""


class ConfigError(InputError):
    def __init__(self, message: str, *, field: str | None = None, line: int | None = None):
        location = []
        if field:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")
        self.field = field
        self.line = line


class SchemaViolation(SilError):
    """A document does not match its JSON schema."""

    def __init__(self, kind: str, issues: list[tuple[str, str]]):
        first_path, first_message = issues[0]
        more = f" (+{len(issues) - 1} more)" if len(issues) > 1 else ""
        super().__init__(f"{kind} document invalid at '{first_path or '<root>'}': {first_message}{more}")
        self.kind = kind
        self.issues = issues


class PanelFormatError(InputError):
    """Malformed edge-list or panel CSV (missing columns, duplicates, gaps)."""


class AssumptionViolation(InputError):
    def __init__(self, assumption: str, message: str, *, diagnostic: float | None = None):
        super().__init__(f"{assumption} violated: {message}")
        self.assumption = assumption
        self.diagnostic = diagnostic


class InsufficientDataError(InputError):
    """Not enough periods or units for the requested transform or estimator."""


class EmptyNetworkError(InputError):
    """The network (or the off-diagonal of a reduced form) carries no links."""


class UnknownUnitError(InputError):
    """A unit label was requested that the network does not contain."""


class NumericalError(SilError, ArithmeticError):
    """A numerical routine failed on otherwise valid input."""


class RankDeficiencyError(NumericalError):
    def __init__(self, block: str, message: str = "design is rank-deficient"):
        super().__init__(f"{message} ({block})")
        self.block = block


class ConvergenceError(NumericalError):
    def __init__(self, message: str, *, best_residual: float | None = None, logs: list[dict[str, Any]] | None = None):
        suffix = f" (best residual {best_residual:.3e})" if best_residual is not None else ""
        super().__init__(f"{message}{suffix}")
        self.best_residual = best_residual
        self.logs = logs or []


class SilWarning(UserWarning):
    """Base warning category for recoverable conditions."""


class DegenerateCovarianceWarning(SilWarning):
    pass


class ScreeningWarning(SilWarning):
    pass


class ShortPanelWarning(SilWarning):
    pass


class HeterogeneityWarning(SilWarning):
    pass


class GridPointWarning(SilWarning):
    pass
