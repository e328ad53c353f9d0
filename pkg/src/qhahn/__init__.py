"""Numerical toolkit for the q-Hahn PushTASEP, its duality and its moments."""

__version__ = "0.1.0"
