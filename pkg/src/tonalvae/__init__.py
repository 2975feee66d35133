"""Symbolic music encodings, a small VAE, and circle-of-fifths latent metrics."""

__version__ = "0.1.0"
