"""Energy landscape of the axially compressed cylindrical shell (rescaled von Karman-Donnell model)."""

__version__ = "0.1.0"

from .grid import DomainSpec, ScalarField, SymmetryClass  # noqa: E402,F401
