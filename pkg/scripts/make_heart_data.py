#!/usr/bin/env python3
"""Regenerate the committed synthetic cardiovascular data file."""
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from mscmc._synthdata import write_synthetic_heart

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "data", "synthetic-cleveland.data"
    )
    write_synthetic_heart(out)
    print(f"wrote {out}")
