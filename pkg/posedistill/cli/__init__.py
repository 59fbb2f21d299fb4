"""Command-line entry point."""

from .main import build_parser, main, worker_count

__all__ = ["build_parser", "main", "worker_count"]
