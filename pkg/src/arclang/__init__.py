"""Comprehension-style relational queries: parsing, scope checking,
evaluation under switchable conventions, SQL translation, higraph rendering,
and pattern comparison."""

__version__ = "0.1.0"
