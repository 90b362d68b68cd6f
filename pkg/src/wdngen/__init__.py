"""Scenario generation for water distribution networks."""

__version__ = "0.1.0"
