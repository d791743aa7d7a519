"""Exception types shared across the pubmap package."""


class PubmapError(Exception):
    """Base class for all pubmap errors."""


class IngestError(PubmapError):
    """Raised when the publication database file cannot be parsed or mapped."""

    def __init__(self, message, record_index=None):
        if record_index is not None:
            message = f"record {record_index}: {message}"
        super().__init__(message)
        self.record_index = record_index


class ProviderError(PubmapError):
    """Raised when an embedding provider fails or violates its contract."""


class CacheCorruptionError(PubmapError):
    """Raised when an on-disk embedding cache fails its checksum."""


class LayoutError(PubmapError):
    """Raised when the 2D layout optimizer produces non-finite coordinates."""


class ConfigError(PubmapError):
    """Raised when a pipeline config file fails validation."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
