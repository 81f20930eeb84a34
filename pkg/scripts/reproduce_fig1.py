"""Qubit local-content bounds versus theta: lower bounds and the N=40 chained upper bound."""

import sys
from pathlib import Path

from localcontent.cli import main

OUT = Path(__file__).resolve().parent / "out"

if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    sys.exit(main([
        "qubit-bounds",
        "--theta-start", "0", "--theta-stop", "pi/4", "--theta-step", "pi/80",
        "--n-settings", "40",
        "--out-csv", str(OUT / "fig1.csv"),
        "--out-json", str(OUT / "fig1.json"),
        "--out-svg", str(OUT / "fig1.svg"),
        *sys.argv[1:],
    ]))
