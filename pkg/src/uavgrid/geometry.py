"""Grid ray casting between cell centers.

A ray between two cell centers is traced with a supercover line: every cell
whose closed unit square is touched by the segment is reported, including
cells only grazed at a corner. This conservative rule means a ray squeezing
exactly between two diagonally adjacent blockers counts as blocked by both.
"""

from __future__ import annotations

import numpy as np


def supercover_cells(start: tuple[int, int], end: tuple[int, int]) -> list[tuple[int, int]]:
    """All grid cells touched by the segment between the centers of two cells.

    Returns cells in traversal order from ``start`` to ``end``, both endpoints
    included. Integer arithmetic throughout, so exact for any cell pair.
    """
    r0, c0 = start
    r1, c1 = end
    cells = [(r0, c0)]
    dr = r1 - r0
    dc = c1 - c0
    step_r = 1 if dr >= 0 else -1
    step_c = 1 if dc >= 0 else -1
    dr = abs(dr)
    dc = abs(dc)
    ddr = 2 * dr
    ddc = 2 * dc
    r, c = r0, c0

    if ddc >= ddr:
        # shallow: advance along columns
        errorprev = error = dc
        for _ in range(dc):
            c += step_c
            error += ddr
            if error > ddc:
                r += step_r
                error -= ddc
                if error + errorprev < ddc:
                    cells.append((r - step_r, c))
                elif error + errorprev > ddc:
                    cells.append((r, c - step_c))
                else:
                    # passed exactly through a cell corner: both neighbours
                    cells.append((r - step_r, c))
                    cells.append((r, c - step_c))
            cells.append((r, c))
            errorprev = error
    else:
        errorprev = error = dr
        for _ in range(dr):
            r += step_r
            error += ddc
            if error > ddr:
                c += step_c
                error -= ddr
                if error + errorprev < ddr:
                    cells.append((r, c - step_c))
                elif error + errorprev > ddr:
                    cells.append((r - step_r, c))
                else:
                    cells.append((r, c - step_c))
                    cells.append((r - step_r, c))
            cells.append((r, c))
            errorprev = error
    return cells


def line_clear(obstacles: np.ndarray, start: tuple[int, int], end: tuple[int, int]) -> bool:
    """True if no obstacle cell lies on the segment between the two cell
    centers. The endpoint cells themselves never block."""
    for cell in supercover_cells(start, end):
        if cell == start or cell == end:
            continue
        if obstacles[cell]:
            return False
    return True
