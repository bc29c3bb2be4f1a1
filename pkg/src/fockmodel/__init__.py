"""Model theory of row contractions on truncated Fock spaces."""
__version__ = "0.1.0"
