"""Conformer-ensemble benchmark harness: parsing, deduplication, encoders and training."""

__version__ = "0.1.0"
