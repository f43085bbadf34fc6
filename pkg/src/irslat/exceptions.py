"""Error taxonomy shared across the package."""


class ConfigError(ValueError):
    """Configuration document failed to parse or is missing a mandatory key."""


class ValidationError(ConfigError):
    """A configuration or decision invariant is violated; message names it."""


class ContractError(ValueError):
    """Inter-operation contract breach, e.g. dimension mismatch."""


class DomainError(ValueError):
    """Scalar argument outside its mathematical domain."""


class InfeasibleInstanceError(RuntimeError):
    """Both bands carry zero capacity for some device; latency undefined."""


class SdpInfeasibleError(RuntimeError):
    """Covert constraints inconsistent at the requested leakage budget."""

    def __init__(self, binding_count: int, message: str | None = None):
        self.binding_count = binding_count
        super().__init__(message or f"SDP infeasible: {binding_count} binding covert constraint(s)")


class ExperimentError(RuntimeError):
    """Experiment-level failure (e.g. more than 10% of cells failed)."""
