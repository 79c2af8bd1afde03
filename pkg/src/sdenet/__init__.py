"""Network inference for sparse linear stochastic dynamics."""

__version__ = "0.1.0"
