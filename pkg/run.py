#!/usr/bin/env python3
"""
Coherence-trapping toolkit runner
Convenience script to run the command line from the project root, e.g.

    python run.py fig1
    python run.py --threads 8 fig2a --n-bar 0.02 --n-bar 0.05
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

if __name__ == '__main__':
    from src.app import main
    sys.exit(main())
