"""Continual pretraining on logiprep shards: joint masked-token +
implication-classification loss with top-K encoder-layer freezing."""

__version__ = "0.1.0"
