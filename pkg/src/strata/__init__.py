"""Embedding-norm guided identifier renaming attacks on method-name models."""

__version__ = "0.1.0"
