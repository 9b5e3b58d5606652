"""Grid-based georeferencing of natural-history locality descriptions."""

__version__ = "0.1.0"
