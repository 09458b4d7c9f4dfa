"""Corpus curation and selective-masking pipeline for joint
masked-token + entailment-classification pretraining shards."""

__version__ = "0.1.0"
