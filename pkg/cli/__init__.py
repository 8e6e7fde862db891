"""
Command-line entry point for the MinusFace toolkit.
"""

from cli.commands import build_parser, configure_logging, run_command

__all__ = ['build_parser', 'configure_logging', 'run_command']
