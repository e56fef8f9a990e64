"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value or unknown key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class BudgetExceededError(RuntimeError):
    """The exact DP tree outgrew its node budget."""


class InvariantViolation(RuntimeError):
    """A structural property that must hold was found violated."""


class CellBreathingViolation(ValueError):
    """An action outside the admissible near/far set."""
