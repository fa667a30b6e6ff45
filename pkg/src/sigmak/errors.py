class DomainError(ValueError):
    """Raised when an input lies outside the domain where an operation is defined."""
