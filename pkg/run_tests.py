#!/usr/bin/env python3
"""
Test runner script for HybridCI
Shortcuts for the marker groups and coverage runs of the pytest suite.
"""

import subprocess
import sys

USAGE = """
HybridCI Test Runner

Usage:
    python run_tests.py <command> [test file]

Commands:
    all         - Every test, acceptance sweeps included
    unit        - Unit tests only
    integration - Whole-task runs into temporary directories
    fast        - Everything except the slow acceptance sweeps
    slow        - Only the slow acceptance sweeps
    coverage    - Fast tests with an HTML coverage report
    specific    - One test file (e.g. test_evolution.py)
"""

COMMANDS = {
    "all": [],
    "unit": ["-m", "unit"],
    "integration": ["-m", "integration"],
    "fast": ["-m", "not slow"],
    "slow": ["-m", "slow"],
    "coverage": ["-m", "not slow", "--cov=src", "--cov-report=html", "--cov-report=term"],
}


def build_command(argv):
    """pytest argument list for the requested command, or None if it is unusable."""
    command = argv[0].lower()
    if command == "specific":
        if len(argv) < 2:
            print("Error: Please specify a test file")
            return None
        return [f"tests/{argv[1]}"]
    if command not in COMMANDS:
        print(f"Unknown command: {command}")
        return None
    return list(COMMANDS[command])


def main():
    """Run the selected test group and exit non-zero on failures."""
    if len(sys.argv) < 2:
        print(USAGE)
        return

    extra = build_command(sys.argv[1:])
    if extra is None:
        sys.exit(2)

    cmd = [sys.executable, "-m", "pytest", *extra, "-v"]
    print(f"Running: {' '.join(cmd)}")
    result = subprocess.run(cmd)

    if result.returncode == 0:
        print("✅ Tests passed!")
        if sys.argv[1].lower() == "coverage":
            print("📊 Coverage report generated in htmlcov/index.html")
    else:
        print("❌ Tests failed!")
        sys.exit(result.returncode)


if __name__ == "__main__":
    main()
