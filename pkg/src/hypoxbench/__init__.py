"""Desk-scale benchmarking toolkit for daily hypoxia sequence classifiers."""
__version__ = "0.1.0"
