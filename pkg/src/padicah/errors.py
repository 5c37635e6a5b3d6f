"""Shared exception types for the padicah package."""


class DepthExhausted(ValueError):
    """An operation needed a finer rank than the grid provides."""


class ConfigMismatch(ValueError):
    """Objects built over different grids were combined."""


class ValueGuardError(ValueError):
    """Exact series values could exceed the 2**52 exactness guard."""


class WindowError(ValueError):
    """No witness terms exist for the requested check window."""
