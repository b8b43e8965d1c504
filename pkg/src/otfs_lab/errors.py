class ResourceLimitError(RuntimeError):
    """Raised when a dense construction would exceed its configured size cap."""
