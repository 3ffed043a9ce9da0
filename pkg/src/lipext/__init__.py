"""Lipschitz extensions of partial maps on finite metric spaces."""
__version__ = "0.1.0"
