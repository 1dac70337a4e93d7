"""Symbolic and numerical verification of Killing-horizon tensor identities."""

__version__ = "0.1.0"
