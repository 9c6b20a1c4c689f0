"""HybridCI - neural, fuzzy and evolutionary building blocks and their hybrids."""

__version__ = "0.1.0"
