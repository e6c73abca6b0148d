"""Front-door criterion estimation lab."""

__version__ = "0.1.0"
