"""Nonlocal Cahn-Hilliard-Brinkman / Hele-Shaw simulator."""

__version__ = "0.1.0"
