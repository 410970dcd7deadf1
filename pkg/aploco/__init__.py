"""aploco: logarithmic-concept ranking of alternatives with MLP-derived criterion weights."""

__version__ = "0.1.0"
