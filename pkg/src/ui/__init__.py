"""Console output for experiment progress and result tables."""
