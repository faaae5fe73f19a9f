"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: bad input or configuration
exits 2, missing data exits 3, and a violated internal invariant exits 4.
"""


class InputError(ValueError):
    """Invalid argument, configuration value, or malformed input file."""


class DataMissingError(RuntimeError):
    """Required data (zero files, cache entries) is absent or insufficient."""


class InvariantError(RuntimeError):
    """An internal consistency check failed; results cannot be trusted."""
