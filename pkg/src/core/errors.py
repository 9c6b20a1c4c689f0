#!/usr/bin/env python3
"""
Exception hierarchy for HybridCI
Every error the toolkit raises derives from HybridCIError.
"""


class HybridCIError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(HybridCIError, ValueError):
    """Raised for shape mismatches, non-finite data and out-of-range arguments."""


class NumericBlowupError(HybridCIError, ArithmeticError):
    """Raised when a computation leaves the finite range (e.g. a diverging trajectory)."""


class ParseError(HybridCIError, ValueError):
    """
    Raised when a data file cannot be parsed.

    Args:
        message (str): Human readable description
        row (int): 1-based row number in the file (None if not row specific)
        column (int): 1-based column number (None if not cell specific)
    """

    def __init__(self, message, row=None, column=None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
        self.row = row
        self.column = column


class InvalidSplitError(HybridCIError, ValueError):
    """Raised when a split specification cannot partition a dataset."""


class InvalidConfigError(HybridCIError, ValueError):
    """
    Raised when a configuration value is missing, unknown or out of range.

    Args:
        field (str): Dotted path of the offending field
        message (str): What is wrong with it
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.detail = message


class TrainingDivergedError(HybridCIError, ArithmeticError):
    """
    Raised when a trainer produces a non-finite loss.

    Args:
        message (str): Description of the failure
        network: Last network whose loss was finite
        loss_curve (tuple): Losses recorded before divergence
    """

    def __init__(self, message, network=None, loss_curve=()):
        super().__init__(message)
        self.network = network
        self.loss_curve = tuple(loss_curve)


class ComparisonError(HybridCIError):
    """Raised when run records cannot be compared with each other."""
