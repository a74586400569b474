"""Runtime and evaluation harness for terminal-based enterprise automation agents."""

__version__ = "0.1.0"
