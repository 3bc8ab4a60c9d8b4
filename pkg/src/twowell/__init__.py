"""Two-well point-interaction Schroedinger dynamics via charge equations."""

__version__ = "0.1.0"
