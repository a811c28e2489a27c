"""grac: geometry-reconstruction atomistic/continuum coupling on the triangular lattice."""

__all__ = [
    "__version__",
]

__version__ = "0.1.0"
