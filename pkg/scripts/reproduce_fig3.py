"""Optimal chained-inequality angles alpha_k for N=30 at a few theta values."""

import sys
from pathlib import Path

from localcontent.cli import main

OUT = Path(__file__).resolve().parent / "out"

if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    sys.exit(main([
        "chained",
        "--theta-start", "pi/20", "--theta-stop", "pi/4", "--theta-step", "pi/20",
        "--n-settings", "30",
        "--out-csv", str(OUT / "fig3.csv"),
        "--out-angles-csv", str(OUT / "fig3_angles.csv"),
        "--out-svg", str(OUT / "fig3.svg"),
        *sys.argv[1:],
    ]))
