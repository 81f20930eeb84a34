"""Qutrit lower bound versus gamma, with the threshold estimate printed as JSON."""

import sys
from pathlib import Path

from localcontent.cli import main

OUT = Path(__file__).resolve().parent / "out"

if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    # default grid: 0..5 step 0.1 merged with 1.6..2.6 step 0.02
    sys.exit(main([
        "qutrit",
        "--out-csv", str(OUT / "fig2.csv"),
        "--out-json", str(OUT / "fig2.json"),
        "--out-svg", str(OUT / "fig2.svg"),
        *sys.argv[1:],
    ]))
