"""Command line front ends: render-traj and render-grid."""

from __future__ import annotations

import argparse
import sys

from .gridsearch import render_gridsearch
from .inputs import InputError
from .trajectory import render_trajectory


def _run(fn, args) -> int:
    try:
        out = fn()
    except (InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


def main_traj(argv=None) -> int:
    p = argparse.ArgumentParser(
        prog="render-traj",
        description="Render an exported trajectory JSONL over its map as SVG.")
    p.add_argument("trajectory", help="trajectory records file (JSONL)")
    p.add_argument("map", help="map description file (JSON)")
    p.add_argument("-o", "--output", required=True, help="output SVG path")
    args = p.parse_args(argv)
    return _run(lambda: render_trajectory(args.trajectory, args.map,
                                          args.output), args)


def main_grid(argv=None) -> int:
    p = argparse.ArgumentParser(
        prog="render-grid",
        description="Render a grid-search result CSV as a scatter SVG.")
    p.add_argument("results", help="grid-search results file (CSV)")
    p.add_argument("-o", "--output", required=True, help="output SVG path")
    args = p.parse_args(argv)
    return _run(lambda: render_gridsearch(args.results, args.output), args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main_traj())
