"""Exception types shared across the toolkit."""


class NodepackError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(NodepackError):
    """Invalid benchmark configuration or plan parameters."""


class UnknownPresetError(ConfigError):
    """Requested a benchmark preset that does not exist."""


class OversubscriptionError(NodepackError):
    """More concurrent workers requested than slots available."""


class TemplateError(NodepackError):
    """Script template left an unresolved placeholder."""


class CapacityError(NodepackError):
    """A scheduling unit needs more core slots than its node has."""


class SizeError(NodepackError):
    """Input exceeds the size cap of the reference (brute-force) path."""


class EmptyLogError(NodepackError):
    """Operation requires a non-empty event log."""


class CapacityExceededError(NodepackError):
    """Observed concurrency exceeds the declared processor count."""


class InsufficientDataError(NodepackError):
    """Not enough runtime samples to compute the requested statistic."""


class MalformedLogError(NodepackError):
    """Event log CSV could not be parsed."""

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number
