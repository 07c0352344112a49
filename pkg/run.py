#!/usr/bin/env python3
"""
CarbonShift Runner

Thin launcher for the command-line interface:

    python run.py --config data/scenarios/toy5.env compare
"""

import os
import sys

# Add the repository root to the Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app.main import main  # noqa: E402

if __name__ == "__main__":
    main()
