"""Cartan projections, sublinearly Morse sequences and Hilbert geometry for matrix groups."""

__version__ = "0.1.0"
