"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad schedules, malformed specs, unreadable config files."""


class ContractError(ValueError):
    """Caller violated an operation's preconditions (shape mismatch, bad ranges)."""


class DomainError(ValueError):
    """Numeric argument outside the mathematical domain of a formula."""


class EstimatorUnavailable(RuntimeError):
    """No usable estimate exists (singular design, too few observations)."""


class UnsupportedCaseError(ValueError):
    """Requested a closed form outside the parameter regime where it is derived."""


class InfeasibleConditioning(RuntimeError):
    """Rejection sampler produced no accepted draws within the attempt budget."""

    def __init__(self, attempts: int):
        super().__init__(
            f"no accepted trajectories after {attempts} attempts; "
            "the conditioning event appears to have negligible probability"
        )
        self.attempts = attempts
