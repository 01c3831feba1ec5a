"""Plots built from tunnelclock CSV files.

This package never imports tunnelclock: it consumes the documented CSV
schemas only, so figures can be regenerated from shipped run outputs on
a machine without the simulation package installed.
"""

__all__ = ["SchemaError"]

from .io import SchemaError
