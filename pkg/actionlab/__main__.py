"""
Main entry point.
Usage: python -m actionlab run config/energy_suite.json
"""

import sys

from .cli import main

if __name__ == '__main__':
    sys.exit(main())
