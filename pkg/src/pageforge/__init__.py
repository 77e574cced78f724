"""pageforge: paper-to-webpage generation workbench and page metric suite."""

__version__ = "0.1.0"
