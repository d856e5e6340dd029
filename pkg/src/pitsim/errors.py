"""Exception types shared across the package."""

from __future__ import annotations


class ConfigurationError(ValueError):
    """Invalid parameter value (non-positive radius, bad density, ...)."""


class ScenarioError(ConfigurationError):
    """Scenario document failed parsing or validation; carries a field path."""

    def __init__(self, message: str, path: str = "") -> None:
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class BehaviorBusyError(RuntimeError):
    """Trigger received while the behavior is not idle."""


class ReplayMismatchError(RuntimeError):
    """Replayed stream diverged from the recorded one."""

    def __init__(self, line_number: int, step: int | None, expected: str, actual: str) -> None:
        self.line_number = line_number
        self.step = step
        self.expected = expected
        self.actual = actual
        where = f"step {step}" if step is not None else f"line {line_number}"
        super().__init__(f"replay diverged at {where}")
