"""Multiple-identity image attacks on hypersphere face representations."""

__version__ = "0.1.0"
