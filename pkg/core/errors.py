"""Exception hierarchy shared by the services and the CLI.

Every exception carries the process exit code the CLI maps it to.
"""

from dataclasses import dataclass


class LinepebError(Exception):
    exit_code: int = 1


class ConfigError(LinepebError):
    """Unreadable, schema-invalid or infeasible scenario configuration."""

    exit_code = 2


class NumericalError(LinepebError):
    exit_code = 3


@dataclass(frozen=True)
class UnanchoredSubchain:
    """A run of consecutive agents whose information never reaches an anchor.

    Attributes:
        first: 1-based index of the first agent in the run.
        last: 1-based index of the last agent in the run.
        coordinates: Coordinates ("x", "y", "z") left without anchor information.
    """

    first: int
    last: int
    coordinates: tuple[str, ...]

    def describe(self) -> str:
        span = f"agent {self.first}" if self.first == self.last else f"agents {self.first}..{self.last}"
        return f"{span} (no anchor information in {', '.join(self.coordinates)})"


class SingularFimError(NumericalError):
    def __init__(self, message: str, subchains: list[UnanchoredSubchain] | None = None):
        self.subchains = subchains or []
        if self.subchains:
            message = f"{message}: " + "; ".join(s.describe() for s in self.subchains)
        super().__init__(message)


class FactorizationError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class ThresholdUnreachableError(NumericalError):
    pass


class ValidationFailure(LinepebError):
    exit_code = 4
