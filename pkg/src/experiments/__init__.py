"""Experiment harness - task runners, result files and run comparison."""
