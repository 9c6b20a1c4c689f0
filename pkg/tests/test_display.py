#!/usr/bin/env python3
"""
Test suite for the display system.
Tests console output, quiet mode, line history and result tables.
"""

import io

from src.ui.display import Display, format_table


class TestDisplaySystem:
    """Test the core display system functionality."""

    def test_display_creation(self):
        """Test display system initialization."""
        display = Display()

        assert display.content_lines == []
        assert display.quiet is False
        assert display.header_text == "HybridCI"

    def test_add_line_writes_to_stream(self):
        """Test that lines are recorded and printed indented."""
        stream = io.StringIO()
        display = Display(stream=stream)

        display.add_line("Generation 1")

        assert display.content_lines == ["Generation 1"]
        assert stream.getvalue() == "  Generation 1\n"

    def test_add_lines_splits_strings(self):
        """Test adding a multi-line string."""
        display = Display(stream=io.StringIO())

        display.add_lines("first\nsecond")

        assert display.content_lines == ["first", "second"]

    def test_quiet_mode_records_but_does_not_print(self):
        """Test that quiet mode suppresses output only."""
        stream = io.StringIO()
        display = Display(stream=stream)
        display.set_quiet(True)

        display.add_line("hidden")
        display.print_header()

        assert stream.getvalue() == ""
        assert display.content_lines == ["hidden"]

    def test_history_limit(self):
        """Test that old lines are dropped beyond the limit."""
        display = Display(stream=io.StringIO(), history_limit=3)

        display.add_lines([str(i) for i in range(5)])

        assert display.content_lines == ["2", "3", "4"]

    def test_header_and_footer(self):
        """Test bar widths and texts."""
        stream = io.StringIO()
        display = Display(stream=stream, ui_width=20)
        display.set_header("run")
        display.set_footer("done")

        display.print_header()
        display.print_footer()
        lines = stream.getvalue().splitlines()

        assert all(len(line) == 20 for line in lines if line.strip("= ") == "")
        assert "run" in lines[1]
        assert lines[-2].strip() == "done"


class TestTables:
    """Test result table formatting."""

    def test_format_table(self):
        """Test alignment, the header rule and cell formatting."""
        table = format_table(["name", "rmse"], [["a", 0.123456789], ["longer", None]])
        lines = table.splitlines()

        assert lines[0] == "name    rmse"
        assert lines[1] == "------  --------"
        assert lines[2] == "a       0.123457"
        assert lines[3] == "longer  -"

    def test_show_table_returns_text(self):
        """Test that show_table prints and returns the table."""
        stream = io.StringIO()
        display = Display(stream=stream)

        table = display.show_table(["k"], [[1]], title="Results")

        assert table == "k\n-\n1"
        assert "Results" in stream.getvalue()
        assert "  1" in stream.getvalue()
