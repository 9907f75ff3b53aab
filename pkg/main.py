#!/usr/bin/env python3
"""
purestate command-line entry point
"""

if __name__ == "__main__":
    from app.main import main

    raise SystemExit(main())
