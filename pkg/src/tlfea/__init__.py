"""Total Lagrangian T10 finite elements for flexible multibody dynamics."""

__version__ = "0.1.0"
