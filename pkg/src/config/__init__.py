"""Toolkit settings and experiment configuration."""
