"""State-space inference for latent force models with periodic and
quasi-periodic Gaussian process forces."""

__version__ = "0.1.0"
