#!/usr/bin/env python3
"""
gabor-eb CLI driver

Runs the click application from a source checkout without installing the console script.

Usage:
    python cli_driver.py --help
    python cli_driver.py spline --rates -2,-1,1,2
    python cli_driver.py bounds sweep --out sweep.csv
"""

from core.cli import main

if __name__ == "__main__":
    main()
