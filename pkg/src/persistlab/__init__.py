"""persistlab: exact Gaussian sampling and one-sided persistence exponents."""
__version__ = "0.1.0"
