"""Generative group-conversation simulation on a multiset-rewriting engine."""

__version__ = "0.1.0"
