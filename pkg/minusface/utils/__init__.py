"""
Utility modules for MinusFace.
"""

from minusface.utils.parsing import load_config_file, parse_seed, split_overrides
from minusface.utils.report_formatter import (
    comparison_rows,
    format_comparison,
    format_invariant_table,
    format_key_values,
    format_summary,
    format_table,
    recovery_csv,
    recovery_summary,
)

__all__ = [
    'parse_seed',
    'load_config_file',
    'split_overrides',
    'format_key_values',
    'format_table',
    'format_invariant_table',
    'format_summary',
    'comparison_rows',
    'format_comparison',
    'recovery_csv',
    'recovery_summary',
]
