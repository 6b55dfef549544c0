"""Joint channel sensing and resource allocation for overlay cognitive radios."""

__version__ = "0.1.0"
