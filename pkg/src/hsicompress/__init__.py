"""Compression of hyperspectral patch classifiers: pruning, quantization and distillation."""

__version__ = "0.1.0"
