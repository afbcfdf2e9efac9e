"""Exact formal normal forms for perturbed Hermitian quadrics."""

__version__ = "0.1.0"
