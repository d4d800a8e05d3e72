"""Probabilistic low-cycle-fatigue crack initiation with size effect and notch support."""

__version__ = "0.1.0"
