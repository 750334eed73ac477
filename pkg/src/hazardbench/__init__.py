"""Survival models and a seeded concordance-index benchmark."""
__version__ = "0.1.0"
