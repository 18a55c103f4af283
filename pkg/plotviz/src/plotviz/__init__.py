"""SVG rendering for UAV mission trajectories and grid-search results.

Consumes the simulator's exported file formats (trajectory JSONL, map
JSON, grid-search CSV) and nothing else. Output is plain hand-built SVG:
byte-stable for fixed inputs and renderer version, so golden files diff
cleanly in CI.
"""

RENDERER_VERSION = "1"

from .gridsearch import render_gridsearch
from .trajectory import render_trajectory

__all__ = ["RENDERER_VERSION", "render_gridsearch", "render_trajectory"]
