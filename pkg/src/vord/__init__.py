"""Variable-order time-fractional diffusion on periodic boxes."""

__version__ = "0.1.0"
