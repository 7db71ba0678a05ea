"""Canonical forms, slow-fast reduction and simulation of two-piece continuous PWL systems."""

__version__ = "0.1.0"
