"""Numerical lab for the pseudo-reaction-diffusion view of adversarial training."""

__version__ = "0.1.0"
