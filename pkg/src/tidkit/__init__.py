"""Temporal influence diagrams: inference, tailoring, unrolling and model selection."""

__version__ = "0.1.0"
