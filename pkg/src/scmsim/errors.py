"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
ContractError (and subclasses) -> 3, OSError -> 4.
"""


class ScmsimError(Exception):
    pass


class ConfigError(ScmsimError, ValueError):
    """Bad configuration file, unknown key, or invalid field value."""


class ContractError(ScmsimError, ValueError):
    """A documented precondition or invariant was violated at runtime."""


class ShapeError(ContractError):
    """Operand dimensions do not match the operation's contract."""
