"""Exemplar-conditioned hierarchical encoder-decoder for goal-oriented dialogue."""

__version__ = "0.1.0"
