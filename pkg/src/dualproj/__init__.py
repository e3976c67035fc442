"""Dual-projection conditional GAN losses on a 1-D mixture benchmark."""

__version__ = "0.1.0"
