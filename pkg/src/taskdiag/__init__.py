"""Pre-training diagnostics for temporal taskifications of data streams."""

__version__ = "0.1.0"
