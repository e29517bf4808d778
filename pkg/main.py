#!/usr/bin/env python3
"""Main entry point for the leafspace engine."""

import sys

from cli import cli


def main():
    """Run the leafspace command line."""
    try:
        return cli(standalone_mode=True)
    except KeyboardInterrupt:
        print("\n\n⚠️  Interrupted by user")
        return 2


if __name__ == "__main__":
    sys.exit(main())
