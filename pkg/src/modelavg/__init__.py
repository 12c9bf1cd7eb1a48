"""Data-parallel neural network training with periodic model averaging."""

__version__ = "0.1.0"
