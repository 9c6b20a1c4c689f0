"""Hybrid systems built on the evolutionary engine: MLEANN and EvoNF."""
