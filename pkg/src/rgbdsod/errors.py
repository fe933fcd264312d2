"""Exception hierarchy shared across the package.

Exit codes used by the CLI: config errors map to 2, data errors
(including contract violations surfaced by bad inputs) to 3, and
numerical failures to 4.
"""


class RgbdSodError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(RgbdSodError):
    """Invalid configuration: bad option value, violated config invariant."""

    exit_code = 2


class DataError(RgbdSodError):
    """Missing, undecodable, or inconsistent input data."""

    exit_code = 3


class ContractViolation(DataError):
    """An operation received arguments that break its documented contract."""


class NumericalError(RgbdSodError):
    """Non-finite values encountered where finite ones are required."""

    exit_code = 4
