#!/usr/bin/env python3
"""
fluxstoq - sign-problem-free simulation of coupled flux qubits
"""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
