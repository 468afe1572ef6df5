"""Exception types shared across the package.

Split by how the CLI reports them: configuration problems exit with
code 2, numerical failures (stiffness, blow-up, probability leakage)
with code 3.
"""


class ConfigError(ValueError):
    """Invalid configuration, parameters, or schedule evaluation window."""


class NumericsError(RuntimeError):
    """Integration failure: step underflow, blow-up, conservation breach."""
