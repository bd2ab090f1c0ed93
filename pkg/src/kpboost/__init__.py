"""Kernel-perturbation boosting of SVMs for imbalanced classification."""

__version__ = "0.1.0"
