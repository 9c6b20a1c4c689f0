#!/usr/bin/env python3
"""
Console output for HybridCI runs
Header/footer bars, progress lines and aligned result tables.
"""

import sys


class Display:
    """Writes run progress to a stream; quiet mode keeps lines but prints nothing."""

    def __init__(self, stream=None, ui_width=80, history_limit=500):
        """
        Initialize display.

        Args:
            stream: Output stream (defaults to sys.stdout at write time)
            ui_width (int): Width of header and footer bars
            history_limit (int): Number of recent lines kept in content_lines
        """
        self.stream = stream
        self.ui_width = ui_width
        self.history_limit = history_limit
        self.quiet = False
        self.header_text = "HybridCI"
        self.footer_text = ""
        self.content_lines = []

    def set_quiet(self, enabled):
        """Suppress console output (lines are still recorded)."""
        self.quiet = enabled

    def set_header(self, text):
        self.header_text = text

    def set_footer(self, text):
        self.footer_text = text

    def _write(self, text):
        if not self.quiet:
            print(text, file=self.stream or sys.stdout)

    def print_header(self):
        """Print the header bar."""
        self._write("=" * self.ui_width)
        self._write(f"    {self.header_text}    ".center(self.ui_width, "="))
        self._write("=" * self.ui_width)

    def print_footer(self):
        """Print the footer bar."""
        self._write("=" * self.ui_width)
        if self.footer_text:
            self._write(self.footer_text.center(self.ui_width))
            self._write("=" * self.ui_width)

    def add_line(self, line=""):
        """Record and print one line."""
        self.content_lines.append(line)
        if len(self.content_lines) > self.history_limit:
            self.content_lines.pop(0)
        self._write(f"  {line}")

    def add_lines(self, lines):
        """
        Record and print several lines.

        Args:
            lines (list or str): Lines, or one string split on newlines
        """
        if isinstance(lines, str):
            lines = lines.split("\n")
        for line in lines:
            self.add_line(line)

    def clear_content(self):
        self.content_lines = []

    def show_table(self, headers, rows, title=None):
        """
        Print rows as an aligned text table.

        Returns:
            str: The formatted table
        """
        table = format_table(headers, rows)
        if title:
            self.set_header(title)
            self.print_header()
        self.add_lines(table)
        return table


def _cell(value):
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def format_table(headers, rows):
    """Left-aligned text columns separated by two spaces, with a dashed rule under the headers."""
    cells = [[str(h) for h in headers]] + [[_cell(v) for v in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = ["  ".join(value.ljust(width) for value, width in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * width for width in widths))
    return "\n".join(lines)


# Global display instance for easy access
display = Display()
