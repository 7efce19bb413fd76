"""Shared helpers for the reproduction scripts: run CLI verbs in-process."""

import sys
from pathlib import Path

from probssi.cli import main

ROOT = Path(__file__).resolve().parent.parent
EXPERIMENTS = ROOT / "experiments"


def cli(*argv) -> None:
    """Run one CLI command and stop the script on a non-zero exit code."""
    code = main([str(a) for a in argv])
    if code:
        sys.exit(code)


def cfg(name: str) -> Path:
    return EXPERIMENTS / f"{name}.cfg"
