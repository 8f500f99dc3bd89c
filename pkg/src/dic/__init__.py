"""Achievable rate regions for three-user-pair deterministic interference channels."""

__version__ = "0.1.0"
