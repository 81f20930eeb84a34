"""``localcontent`` command line: run a sweep, write CSV / JSON / SVG.

Exit codes: 0 success, 1 validation failure (JSON summary on stderr),
2 usage error, 3 I/O error.

A ``--config`` file holds flat ``key = value`` lines using the long flag
names without dashes (``theta_stop = pi/4``, ``n_settings = 10, 40``).
Blank lines and ``#`` comments are ignored.  Flags given on the command line
override the file, which overrides the built-in defaults.
"""

from __future__ import annotations

import argparse
import ast
import json
import math
import operator
import sys
from pathlib import Path

from .report import (
    FIGURE_FOR_MODE,
    QUTRIT_DEFAULT_GRID,
    QUTRIT_FINE_GRID,
    RUNNERS,
    SweepConfig,
    SweepMode,
    emit_svg,
    write_csv,
    write_json,
)

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}


def parse_number(text: str) -> float:
    """Evaluate arithmetic like ``pi/4`` or ``3*pi/80`` without ``eval``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(f"not a number: {text!r}")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def _number(text: str) -> float:
    try:
        return parse_number(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


DEFAULTS = {
    SweepMode.QUBIT_BOUNDS: dict(start=0.0, stop=math.pi / 4, step=math.pi / 80),
    SweepMode.CHAINED: dict(start=math.pi / 84, stop=20 * math.pi / 84, step=math.pi / 84),
    SweepMode.VERIFY: dict(start=math.pi / 40, stop=math.pi / 4, step=math.pi / 40),
    SweepMode.QUTRIT: dict(start=QUTRIT_DEFAULT_GRID[0], stop=QUTRIT_DEFAULT_GRID[1],
                           step=QUTRIT_DEFAULT_GRID[2]),
}

_CONFIG_KEYS = {
    "theta_start": parse_number, "theta_stop": parse_number, "theta_step": parse_number,
    "gamma_start": parse_number, "gamma_stop": parse_number, "gamma_step": parse_number,
    "n_settings": lambda v: [int(x) for x in v.replace(",", " ").split()],
    "grid_size": int, "restarts": int, "seed": int, "tolerance": parse_number,
    "workers": int, "out_csv": str, "out_json": str, "out_svg": str,
    "out_angles_csv": str,
}


class UsageError(Exception):
    pass


def read_config_file(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unrecognised line {raw!r}")
        try:
            out[key] = _CONFIG_KEYS[key](value.strip())
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="localcontent", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for mode in SweepMode:
        sp = sub.add_parser(mode.value)
        # default=None everywhere so unset flags fall through to the config file
        if mode is SweepMode.QUTRIT:
            sp.add_argument("--gamma-start", type=_number)
            sp.add_argument("--gamma-stop", type=_number)
            sp.add_argument("--gamma-step", type=_number)
        else:
            sp.add_argument("--theta-start", type=_number)
            sp.add_argument("--theta-stop", type=_number)
            sp.add_argument("--theta-step", type=_number)
        sp.add_argument("--n-settings", type=int, action="append",
                        help="chained inequality size N (repeatable)")
        sp.add_argument("--grid-size", type=int, help="sphere points per party for verification")
        sp.add_argument("--restarts", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--tolerance", type=_number, help="bisection tolerance on the weight")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out-csv")
        sp.add_argument("--out-json")
        sp.add_argument("--out-svg")
        if mode is SweepMode.CHAINED:
            sp.add_argument("--out-angles-csv")
        sp.add_argument("--config", help="flat key = value file")
    return p


def sweep_config(args: argparse.Namespace) -> SweepConfig:
    mode = SweepMode(args.command)
    merged = read_config_file(args.config) if args.config else {}
    for k, v in vars(args).items():
        if v is not None and k not in ("command", "config"):
            merged[k] = v
    prefix = "gamma" if mode is SweepMode.QUTRIT else "theta"
    grid = dict(DEFAULTS[mode])
    for part in ("start", "stop", "step"):
        if f"{prefix}_{part}" in merged:
            grid[part] = merged[f"{prefix}_{part}"]
    fine = None
    if mode is SweepMode.QUTRIT and not any(f"gamma_{x}" in merged for x in ("start", "stop", "step")):
        fine = QUTRIT_FINE_GRID
    if mode is not SweepMode.QUTRIT:
        if grid["start"] < 0 or grid["stop"] > math.pi / 4 + 1e-12:
            raise UsageError("theta grid must lie in [0, pi/4]")
    paths = {k: Path(merged[k]) for k in ("out_csv", "out_json", "out_svg", "out_angles_csv")
             if merged.get(k)}
    extra = {k: merged[k] for k in ("grid_size", "restarts", "seed", "tolerance", "workers")
             if k in merged}
    try:
        return SweepConfig(
            mode=mode,
            n_settings=tuple(merged.get("n_settings", (40,))),
            fine_grid=fine,
            **grid, **paths, **extra,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_outputs(config: SweepConfig, result) -> None:
    if config.out_csv:
        write_csv(result, config.out_csv)
    if config.out_angles_csv:
        write_csv(result, config.out_angles_csv, angles=True)
    if config.out_json:
        write_json(result, config.out_json)
    if config.out_svg:
        fig = FIGURE_FOR_MODE.get(config.mode)
        if fig is None:
            raise UsageError(f"no figure for mode {config.mode.value}")
        emit_svg(result, fig, config.out_svg)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        config = sweep_config(args)
    except UsageError as exc:
        print(f"localcontent: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"localcontent: cannot read config {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO

    result = RUNNERS[config.mode](config)
    try:
        _write_outputs(config, result)
    except UsageError as exc:
        print(f"localcontent: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"localcontent: cannot write {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO

    if result.summary:
        print(json.dumps(result.summary, sort_keys=True))
    if not result.ok:
        json.dump({"status": "validation_failed", "mode": config.mode.value,
                   "failures": result.failures}, sys.stderr, indent=2)
        sys.stderr.write("\n")
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
