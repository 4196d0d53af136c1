"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A configuration value violates its documented bounds or schema."""


class ContractError(ValueError):
    """An operation was called with arguments outside its contract."""


class TrainingError(RuntimeError):
    """Optimization produced non-finite values; the run cannot continue."""
