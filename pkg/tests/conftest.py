"""
Pytest configuration and shared fixtures for HybridCI tests
"""

import os
from unittest.mock import patch

import numpy as np
import pytest

from src.config.settings import toolkit_settings
from src.core.datasets import Dataset
from src.evolution.engine import EAConfig
from src.fuzzy.inference import FuzzyRule, FuzzySystem, SystemKind, uniform_variable
from src.fuzzy.membership import MFKind


@pytest.fixture
def linear_dataset():
    """40 rows of y = 0.5 x1 - 0.25 x2 + 0.1 on a regular grid in [0, 1]^2."""
    grid = np.linspace(0.0, 1.0, 8)
    x1, x2 = np.meshgrid(grid, grid[:5])
    inputs = np.column_stack([x1.ravel(), x2.ravel()])
    targets = (0.5 * inputs[:, 0] - 0.25 * inputs[:, 1] + 0.1).reshape(-1, 1)
    return Dataset(inputs, targets, "linear")


@pytest.fixture
def sine_dataset():
    """30 rows of a smooth one-input curve."""
    x = np.linspace(0.0, 1.0, 30).reshape(-1, 1)
    return Dataset(x, 0.5 + 0.4 * np.sin(2.0 * np.pi * x), "sine")


@pytest.fixture
def ts_system():
    """Two-input Takagi-Sugeno system with four grid rules on [0, 1]^2."""
    inputs = (uniform_variable("x1", (0.0, 1.0), 2, MFKind.GAUSSIAN),
              uniform_variable("x2", (0.0, 1.0), 2, MFKind.GAUSSIAN))
    rules = tuple(FuzzyRule(cell, (0.0, 0.0, float(index)))
                  for index, cell in enumerate([(0, 0), (1, 0), (0, 1), (1, 1)]))
    return FuzzySystem(SystemKind.TAKAGI_SUGENO, inputs, rules)


@pytest.fixture
def mamdani_system():
    """One-input Mamdani system mapping low -> low and high -> high on [0, 1]."""
    x = uniform_variable("x", (0.0, 1.0), 2, MFKind.GAUSSIAN)
    y = uniform_variable("y", (0.0, 1.0), 2, MFKind.GAUSSIAN)
    return FuzzySystem(SystemKind.MAMDANI, (x,), (FuzzyRule((0,), 0), FuzzyRule((1,), 1)), y)


@pytest.fixture
def small_ea():
    """Quick evolution settings for tests."""
    return EAConfig(population_size=6, generations=3, elitism=1, tournament_k=2, mutation_rate=0.3, seed=7)


@pytest.fixture
def quiet_display():
    """Silence console output of the global display."""
    with patch('src.ui.display.display.quiet', True):
        yield


@pytest.fixture(autouse=True)
def setup_test_environment():
    """Restore the working directory and toolkit settings after each test."""
    original_cwd = os.getcwd()
    original_settings = toolkit_settings.as_dict()

    yield

    os.chdir(original_cwd)
    toolkit_settings.threads = original_settings["threads"]
    toolkit_settings.log_level = original_settings["log_level"]
    toolkit_settings.defuzz_resolution = original_settings["defuzz_resolution"]
    toolkit_settings.penalty_fitness = original_settings["penalty_fitness"]


# Markers for different test types
def pytest_configure(config):
    """Configure custom markers."""
    config.addinivalue_line("markers", "unit: Unit tests")
    config.addinivalue_line("markers", "integration: Integration tests")
    config.addinivalue_line("markers", "slow: Slow running tests (full acceptance runs)")


# Custom test collection
def pytest_collection_modifyitems(config, items):
    """Add the unit marker to every test that is not integration or slow."""
    for item in items:
        if not any(marker.name in ['integration', 'slow'] for marker in item.iter_markers()):
            item.add_marker(pytest.mark.unit)
