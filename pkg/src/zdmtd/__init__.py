"""Zero-determinant moving-target-defense toolkit for repeated security games."""

__version__ = "0.1.0"
