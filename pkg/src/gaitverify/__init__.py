"""Gait feature learning and per-user one-class-SVM verification toolkit."""

__version__ = "0.1.0"
