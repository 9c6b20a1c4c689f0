"""Core systems - numeric substrate, datasets, errors and run records."""
