"""Finite-blocklength entanglement distillation bounds."""

__version__ = "0.1.0"
