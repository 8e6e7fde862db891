#!/usr/bin/env python3
"""
Run the MinusFace toolkit.
Validates the environment configuration, then dispatches one subcommand.

Usage:
    python run.py --help                              # List subcommands
    python run.py check-invariants --mapping dct8     # Property suites
    MINUSFACE_PRESET=full python run.py train-stage1 --data data/ --out runs/full
"""

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

# Import configuration
from config.config import active_config as Config

# Validate configuration before starting
try:
    Config.validate()
except ValueError as e:
    print("\n❌ Configuration Error:", file=sys.stderr)
    print(str(e), file=sys.stderr)
    print("\n📝 Please check your .env file; copy .env.example to .env to start from the defaults.\n",
          file=sys.stderr)
    sys.exit(1)

from cli.commands import run_command

if __name__ == '__main__':
    if sys.stderr.isatty():
        print("\n" + "=" * 60, file=sys.stderr)
        print(f"  MinusFace - {Config.PRESET.upper()} preset", file=sys.stderr)
        print("=" * 60, file=sys.stderr)
        print(f"  Epochs: {Config.EPOCHS}  Batch: {Config.BATCH_SIZE}  LR drops: {Config.LR_DROP_EPOCHS}",
              file=sys.stderr)
        print(f"  Seeds: init={Config.INIT_SEED} data={Config.DATA_SEED} shuffle={Config.SHUFFLE_SEED}",
              file=sys.stderr)
        print(f"  Log: {Config.LOG_FILE} ({Config.LOG_LEVEL})", file=sys.stderr)
        print("=" * 60 + "\n", file=sys.stderr)

    sys.exit(run_command(sys.argv[1:]))
