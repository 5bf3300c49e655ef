#!/usr/bin/env python3
"""
Run the robust reserve toolkit from a source checkout
"""

import sys
from pathlib import Path

# Add project root to path
sys.path.append(str(Path(__file__).parent.parent))

from src.cli import main


if __name__ == "__main__":
    sys.exit(main())
