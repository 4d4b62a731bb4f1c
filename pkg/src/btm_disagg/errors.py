"""Exception hierarchy.

Every domain failure raised by the library derives from
:class:`DisaggregationError`, which the CLI maps to exit code 1.
"""


class DisaggregationError(ValueError):
    """Base class for all domain errors."""


class ParseError(DisaggregationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GapError(DisaggregationError):
    def __init__(self, meter_id, missing):
        self.meter_id = meter_id
        self.missing = list(missing)
        shown = ", ".join(ts.isoformat() for ts in self.missing[:10])
        more = "" if len(self.missing) <= 10 else f" (+{len(self.missing) - 10} more)"
        super().__init__(f"meter {meter_id!r}: gap in hourly grid, missing {shown}{more}")


class DuplicateError(DisaggregationError):
    pass


class SpanError(DisaggregationError):
    """Series spans disagree, or a window/event falls outside the data."""


class GroupError(DisaggregationError):
    pass


class ConfigError(DisaggregationError):
    pass


class NumericsError(DisaggregationError):
    pass
