"""Shortcut-to-adiabaticity pulse design for population transfer in a Lambda system."""

__version__ = "0.1.0"
