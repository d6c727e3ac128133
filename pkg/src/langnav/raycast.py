"""Grid traversal primitives.

Coordinates are continuous cell units: cell ``(i, j)`` covers
``[i, i+1) x [j, j+1)`` and its center is ``(i + 0.5, j + 0.5)``.
"""

from __future__ import annotations

import math
from typing import Iterator

Cell = tuple[int, int]

_SNAP = 1e-12


def direction(degrees: float) -> tuple[float, float]:
    """Unit vector for a heading; 0 deg points along +x, 90 deg along +y."""
    rad = math.radians(degrees)
    dx, dy = math.cos(rad), math.sin(rad)
    if abs(dx) < _SNAP:
        dx = 0.0
    if abs(dy) < _SNAP:
        dy = 0.0
    return dx, dy


def _next_crossing(pos: float, cell: int, d: float) -> float:
    if d > 0:
        return (cell + 1 - pos) / d
    if d < 0:
        return (cell - pos) / d
    return math.inf


def traverse(ox: float, oy: float, dx: float, dy: float, t_max: float) -> Iterator[tuple[int, int, float]]:
    """Yield ``(x, y, t_enter)`` for every cell the segment touches.

    The segment is ``origin + t * (dx, dy)`` for ``t`` in ``[0, t_max]``.
    Supercover semantics: when the segment passes exactly through a grid
    corner both side cells are reported (at the same ``t``) before the
    diagonal one.
    """
    cx, cy = math.floor(ox), math.floor(oy)
    yield cx, cy, 0.0
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    while True:
        tx = _next_crossing(ox, cx, dx)
        ty = _next_crossing(oy, cy, dy)
        t = min(tx, ty)
        if t > t_max or math.isinf(t):
            return
        if tx < ty:
            cx += sx
            yield cx, cy, t
        elif ty < tx:
            cy += sy
            yield cx, cy, t
        else:
            yield cx + sx, cy, t
            yield cx, cy + sy, t
            cx += sx
            cy += sy
            yield cx, cy, t


def line_cells(a: Cell, b: Cell) -> list[Cell]:
    """Supercover line between the centers of cells ``a`` and ``b`` (inclusive)."""
    if a == b:
        return [a]
    dx, dy = b[0] - a[0], b[1] - a[1]
    # Unnormalized direction keeps corner ties exact: both crossing times are
    # correctly rounded quotients of the same rational.
    return [(x, y) for x, y, _ in traverse(a[0] + 0.5, a[1] + 0.5, float(dx), float(dy), 1.0)]
