"""Frequent term sets, association rules and their daily dynamics in short-message archives."""

__version__ = "0.1.0"
