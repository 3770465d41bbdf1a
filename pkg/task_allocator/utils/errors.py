from typing import Any, Optional


class TaskAllocatorError(Exception):
    """
    Base exception for the package. Carries a message and, optionally, the value that triggered it.
    """
    def __init__(self, message: str, value: Optional[Any] = None):
        self.message = message
        self.value = value
        super().__init__(self.message)

    def __str__(self):
        if self.value is not None:
            return f"{self.message}\nOffending value: {self.value}"
        return self.message


class ConfigError(TaskAllocatorError, ValueError):
    """Raised when a scenario, reward, training or experiment configuration is invalid."""


class ContractViolation(TaskAllocatorError):
    """Raised when an operation is called with inputs that break its preconditions."""


class CheckpointError(TaskAllocatorError):
    """Raised when a checkpoint cannot be read or does not belong to the scenario being used."""


class UrgencyUndefinedError(TaskAllocatorError):
    """Raised when task urgency is requested for timelines that never assign any agent to a task."""
