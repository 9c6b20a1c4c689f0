"""Evolutionary engine and the fuzzy controller that adapts its parameters."""
