"""Frontier extraction, clustering and linguistic summaries."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ContractViolation
from .mapping import FREE, UNKNOWN, SemanticMap
from .raycast import Cell
from .world import NEIGHBORS4

UNKNOWN_AREA = "unknown area"
DEFAULT_MIN_CLUSTER = 2
DEFAULT_RADIUS_M = 2.0
DEFAULT_MAX_CANDIDATES = 8

_EIGHT = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class Frontier:
    id: int
    cells: tuple[Cell, ...]
    centroid: tuple[float, float]

    @property
    def size(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class FrontierContext:
    frontier_id: int
    room: str
    nearby_objects: tuple[str, ...]
    distance_from_agent: float  # meters; inf when not reachable over known free space

    def to_dict(self) -> dict:
        return {
            "frontier_id": self.frontier_id,
            "room": self.room,
            "nearby_objects": list(self.nearby_objects),
            "distance_m": None if math.isinf(self.distance_from_agent) else self.distance_from_agent,
        }


def frontier_mask(m: SemanticMap) -> np.ndarray:
    unknown = m.occ == UNKNOWN
    near = np.zeros_like(unknown)
    near[1:, :] |= unknown[:-1, :]
    near[:-1, :] |= unknown[1:, :]
    near[:, 1:] |= unknown[:, :-1]
    near[:, :-1] |= unknown[:, 1:]
    return (m.occ == FREE) & near


def extract_frontier_cells(m: SemanticMap) -> set[Cell]:
    ys, xs = np.nonzero(frontier_mask(m))
    return {(int(x), int(y)) for y, x in zip(ys, xs)}


def cluster_frontiers(cells, min_cluster_size: int = DEFAULT_MIN_CLUSTER) -> list[Frontier]:
    """8-connected components, numbered in row-major order of their first cell."""
    if min_cluster_size < 1:
        raise ContractViolation("min_cluster_size must be >= 1")
    cells = set(cells)
    if not cells:
        return []
    xs = [c[0] for c in cells]
    ys = [c[1] for c in cells]
    x0, y0 = min(xs), min(ys)
    grid = np.zeros((max(ys) - y0 + 1, max(xs) - x0 + 1), dtype=bool)
    grid[np.array(ys) - y0, np.array(xs) - x0] = True
    labels, n = ndimage.label(grid, structure=_EIGHT)
    out = []
    # ndimage numbers components in raster order of their first pixel.
    for label in range(1, n + 1):
        ly, lx = np.nonzero(labels == label)
        if len(ly) < min_cluster_size:
            continue
        members = tuple(sorted(((int(x) + x0, int(y) + y0) for y, x in zip(ly, lx)), key=lambda c: (c[1], c[0])))
        cx = sum(c[0] for c in members) / len(members)
        cy = sum(c[1] for c in members) / len(members)
        out.append(Frontier(len(out), members, (cx, cy)))
    return out


def free_distances(m: SemanticMap, start: Cell) -> dict[Cell, int]:
    """BFS step counts over known-Free cells only."""
    if not m.in_bounds(start):
        return {}
    dist = {start: 0}
    queue = deque([start])
    occ = m.occ
    w, h = m.width, m.height
    while queue:
        c = queue.popleft()
        d = dist[c] + 1
        for dx, dy in NEIGHBORS4:
            x, y = c[0] + dx, c[1] + dy
            if 0 <= x < w and 0 <= y < h and (x, y) not in dist and occ[y, x] == FREE:
                dist[(x, y)] = d
                queue.append((x, y))
    return dist


def summarize(m: SemanticMap, f: Frontier, agent_cell: Cell, radius_R: float = DEFAULT_RADIUS_M,
              distances: dict[Cell, int] | None = None) -> FrontierContext:
    """Room, nearby object categories and travel distance for one frontier.

    ``distances`` may carry a precomputed :func:`free_distances` field from
    ``agent_cell`` so several frontiers share one BFS.
    """
    cx, cy = f.centroid
    r_cells = radius_R / m.cell_size
    x0, x1 = max(0, math.floor(cx - r_cells)), min(m.width - 1, math.ceil(cx + r_cells))
    y0, y1 = max(0, math.floor(cy - r_cells)), min(m.height - 1, math.ceil(cy + r_cells))

    best = None
    for y in range(y0, y1 + 1):
        for x in range(x0, x1 + 1):
            if m.room[y, x] < 0:
                continue
            d2 = (x - cx) ** 2 + (y - cy) ** 2
            if d2 > r_cells ** 2 + 1e-9:
                continue
            if best is None or d2 < best[0]:  # row-major scan keeps the smallest index on ties
                best = (d2, x, y)
    room = m.room_at((best[1], best[2])) if best else UNKNOWN_AREA

    nearby = set()
    for cell, entries in m.objects.items():
        if (cell[0] - cx) ** 2 + (cell[1] - cy) ** 2 <= r_cells ** 2 + 1e-9:
            nearby.update(entries.values())

    if distances is None:
        distances = free_distances(m, agent_cell)
    steps = [distances[c] for c in f.cells if c in distances]
    dist = min(steps) * m.cell_size if steps else math.inf
    return FrontierContext(f.id, room, tuple(sorted(nearby)), dist)


def cap_candidates(frontiers: list[Frontier], contexts: list[FrontierContext],
                   max_candidates: int = DEFAULT_MAX_CANDIDATES) -> list[tuple[Frontier, FrontierContext]]:
    """Keep the largest frontiers (ties: nearest), then order nearest-first for prompting."""
    pairs = list(zip(frontiers, contexts))
    pairs.sort(key=lambda p: (-p[0].size, p[1].distance_from_agent, p[0].id))
    kept = pairs[:max_candidates]
    kept.sort(key=lambda p: (p[1].distance_from_agent, p[0].id))
    return kept
