#!/usr/bin/env python3
"""
Toolkit settings for HybridCI
Handles evaluation threads, log level and numeric defaults shared by every run
"""

import json
import logging
import os

logger = logging.getLogger(__name__)

SETTINGS_FILE = os.path.join("config", "settings.json")
THREADS_ENV = "HYBRIDCI_THREADS"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class ToolkitSettings:
    """Manages toolkit-wide settings loaded from config/settings.json."""

    def __init__(self, path=SETTINGS_FILE):
        """
        Initialize the settings with defaults, then overlay the settings file.

        Args:
            path (str): Settings file location
        """
        self.path = path
        self.threads = 0                 # 0 = one worker per CPU
        self.log_level = "INFO"
        self.defuzz_resolution = 201     # output grid points for Mamdani defuzzification
        self.penalty_fitness = 1e30      # fitness given to genomes that fail to evaluate

        self.load_settings()

    def resolve_threads(self):
        """
        Number of fitness-evaluation workers.

        HYBRIDCI_THREADS wins over the settings file; 0 means one per CPU.

        Returns:
            int: Worker count >= 1
        """
        threads = self.threads
        override = os.environ.get(THREADS_ENV)
        if override is not None:
            try:
                threads = max(0, int(override))
            except ValueError:
                logger.warning("Ignoring %s=%r: not an integer", THREADS_ENV, override)
        if threads == 0:
            threads = os.cpu_count() or 1
        return threads

    def as_dict(self):
        return {
            "threads": self.threads,
            "log_level": self.log_level,
            "defuzz_resolution": self.defuzz_resolution,
            "penalty_fitness": self.penalty_fitness,
        }

    def save_settings(self):
        """Save current settings to file."""
        try:
            directory = os.path.dirname(self.path)
            if directory and not os.path.exists(directory):
                os.makedirs(directory)

            with open(self.path, "w", encoding="utf-8") as f:
                json.dump(self.as_dict(), f, indent=2)

        except OSError as exc:
            logger.warning("Could not save settings to %s: %s", self.path, exc)

    def load_settings(self):
        """Load settings from file; missing or unreadable files keep the defaults."""
        try:
            if os.path.exists(self.path):
                with open(self.path, "r", encoding="utf-8") as f:
                    settings_data = json.load(f)

                if isinstance(settings_data, dict):
                    self.threads = max(0, int(settings_data.get("threads", self.threads)))
                    level = str(settings_data.get("log_level", self.log_level)).upper()
                    self.log_level = level if level in LOG_LEVELS else "INFO"
                    # Keep the defuzzification grid fine enough to be meaningful
                    self.defuzz_resolution = max(16, int(settings_data.get("defuzz_resolution",
                                                                           self.defuzz_resolution)))
                    penalty = float(settings_data.get("penalty_fitness", self.penalty_fitness))
                    self.penalty_fitness = penalty if penalty > 0 else 1e30

        except (OSError, ValueError, TypeError, json.JSONDecodeError) as exc:
            logger.warning("Could not read settings from %s, using defaults: %s", self.path, exc)


# Global toolkit settings instance
toolkit_settings = ToolkitSettings()
