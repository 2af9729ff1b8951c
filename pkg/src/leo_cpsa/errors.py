"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration value; the message names the offending field."""


class IngestionError(ConfigurationError):
    """Malformed input data (region map CSV, scenario JSON)."""


class TopologyError(RuntimeError):
    """Graph construction or shortest-path precondition failed."""


class StrategyError(ValueError):
    """A strategy violates the placement/assignment constraints.

    ``violations`` lists the violated constraint numbers (16..20).
    """

    def __init__(self, violations, message=None):
        self.violations = tuple(violations)
        super().__init__(message or f"strategy violates constraints {sorted(self.violations)}")


class CodecError(ValueError):
    """Chromosome does not satisfy the encoding invariants."""


class OracleSizeError(ValueError):
    """Exhaustive-search instance exceeds the enumeration guard."""
