"""Desk-scale workbench for drilling constructions on hyperbolic graphs."""
from __future__ import annotations

__version__ = "0.1.0"
