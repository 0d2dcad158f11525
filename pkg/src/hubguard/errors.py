"""Error taxonomy shared across the package.

Three failure classes, mapped to CLI exit codes by the runner:
configuration problems (bad keys/values), input data problems
(unreadable or malformed files, invalid arguments), and contract
violations (callers breaking documented API rules).
"""


class HubguardError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HubguardError):
    """A config key, value, or combination of settings is invalid."""


class InputError(HubguardError):
    """Input data is missing, malformed, or out of the documented domain."""


class ContractViolationError(HubguardError):
    """A caller broke an API contract (e.g. stepping a finished episode)."""
