"""Generalized Sierpinski carpets: axioms, cell-graph energies and walk-dimension witnesses."""

__version__ = "0.1.0"
