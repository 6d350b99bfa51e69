"""Label-noise filtering laboratory."""
__version__ = "0.1.0"
