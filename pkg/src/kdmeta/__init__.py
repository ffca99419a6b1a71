"""Knowledge-driven meta-learning for MIMO CSI eigenvector feedback."""

__version__ = "0.1.0"
