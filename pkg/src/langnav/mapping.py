"""Agent-side semantic map built from depth scans and detections.

The simulator is planar, so voxelizing depth points yields a single layer
and the top-down projection is the identity on that layer. ``integrate_depth``
therefore writes straight into the 2D occupancy grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .perception import Detections
from .raycast import Cell, direction, traverse
from .world import DepthScan

UNKNOWN, FREE, OBSTACLE = 0, 1, 2
_OCC_CHARS = {UNKNOWN: "?", FREE: ".", OBSTACLE: "#"}
_EPS = 1e-9


@dataclass
class SemanticMap:
    width: int
    height: int
    cell_size: float
    occ: np.ndarray = field(init=False)
    room: np.ndarray = field(init=False)
    objects: dict[Cell, dict[str, str]] = field(default_factory=dict)
    room_names: list[str] = field(default_factory=list)
    explored_count: int = 0

    def __post_init__(self):
        self.occ = np.zeros((self.height, self.width), dtype=np.int8)
        self.room = np.full((self.height, self.width), -1, dtype=np.int16)

    @classmethod
    def for_world(cls, world) -> "SemanticMap":
        # Only the grid geometry is copied; no ground truth leaks into the map.
        return cls(world.width, world.height, world.cell_size)

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def state(self, cell: Cell) -> int:
        return int(self.occ[cell[1], cell[0]])

    def room_at(self, cell: Cell) -> str | None:
        idx = self.room[cell[1], cell[0]]
        return None if idx < 0 else self.room_names[idx]

    def set_state(self, cell: Cell, value: int) -> None:
        x, y = cell
        if self.occ[y, x] == UNKNOWN:
            self.explored_count += 1
        self.occ[y, x] = value

    def _room_index(self, name: str) -> int:
        try:
            return self.room_names.index(name)
        except ValueError:
            self.room_names.append(name)
            return len(self.room_names) - 1

    def object_entries(self) -> list[tuple[Cell, str, str]]:
        """``(cell, category, instance_id)`` in row-major cell order, then id."""
        out = []
        for cell in sorted(self.objects, key=lambda c: (c[1], c[0])):
            for iid, cat in sorted(self.objects[cell].items()):
                out.append((cell, cat, iid))
        return out

    def copy(self) -> "SemanticMap":
        m = SemanticMap(self.width, self.height, self.cell_size)
        m.occ = self.occ.copy()
        m.room = self.room.copy()
        m.objects = {c: dict(v) for c, v in self.objects.items()}
        m.room_names = list(self.room_names)
        m.explored_count = self.explored_count
        return m

    def snapshot(self, frontiers=None) -> dict:
        """JSON-ready export: occupancy rows, objects, room labels, optional frontiers."""
        occ = ["".join(_OCC_CHARS[int(v)] for v in row) for row in self.occ]
        ys, xs = np.nonzero(self.room >= 0)
        rooms = [{"x": int(x), "y": int(y), "room": self.room_names[self.room[y, x]]} for y, x in zip(ys, xs)]
        data = {
            "width": self.width,
            "height": self.height,
            "cell_size": self.cell_size,
            "occ": occ,
            "objects": [{"x": c[0], "y": c[1], "category": cat, "instance_id": iid}
                        for c, cat, iid in self.object_entries()],
            "rooms": rooms,
        }
        if frontiers is not None:
            data["frontiers"] = [
                {"id": f.id, "size": f.size, "centroid": list(f.centroid), "cells": [list(c) for c in f.cells]}
                for f in frontiers
            ]
        return data

    @classmethod
    def from_snapshot(cls, data: dict) -> "SemanticMap":
        m = cls(data["width"], data["height"], data["cell_size"])
        lookup = {v: k for k, v in _OCC_CHARS.items()}
        m.occ = np.array([[lookup[ch] for ch in row] for row in data["occ"]], dtype=np.int8).reshape(
            m.height, m.width)
        m.explored_count = int(np.count_nonzero(m.occ))
        for r in data.get("rooms", []):
            m.room[r["y"], r["x"]] = m._room_index(r["room"])
        for o in data.get("objects", []):
            m.objects.setdefault((o["x"], o["y"]), {})[o["instance_id"]] = o["category"]
        return m

    def to_json(self, frontiers=None) -> str:
        return json.dumps(self.snapshot(frontiers), indent=1)


def ray_cells(ox: float, oy: float, angle: float, length: float, hit: bool) -> tuple[list[Cell], Cell | None]:
    """Cells a ray marks Free and the cell it marks Obstacle (cell units)."""
    dx, dy = direction(angle)
    touched = [(x, y, t) for x, y, t in traverse(ox, oy, dx, dy, length + _EPS)]
    if not hit:
        return [(x, y) for x, y, t in touched if t < length], None
    # The hit cell is the one entered at the hit point when the point sits on
    # a boundary, otherwise the cell containing it.
    at_hit = [i for i, (_, _, t) in enumerate(touched) if i > 0 and abs(t - length) <= _EPS]
    if len(at_hit) > 1:
        # Exact corner: any of the touching cells may be the wall; claim none.
        return [(x, y) for x, y, _ in touched[:at_hit[0]]], None
    hit_index = at_hit[0] if at_hit else len(touched) - 1
    return [(x, y) for x, y, _ in touched[:hit_index]], touched[hit_index][:2]


@lru_cache(maxsize=1 << 16)
def _scan_cells(scan: DepthScan, width: int, height: int, cell_size: float) -> tuple[np.ndarray, np.ndarray]:
    """Flat in-bounds indices a scan marks Free and Obstacle (scans repeat, so this is memoized)."""
    ox, oy = scan.pose.cell[0] + 0.5, scan.pose.cell[1] + 0.5
    free: list[Cell] = [scan.pose.cell]
    obstacles: list[Cell] = []
    for ray in scan.rays:
        cells, hit_cell = ray_cells(ox, oy, scan.pose.heading + ray.angle_offset, ray.range / cell_size, ray.hit)
        free.extend(cells)
        if hit_cell is not None:
            obstacles.append(hit_cell)

    def flat(cells: list[Cell]) -> np.ndarray:
        idx = sorted({y * width + x for x, y in cells if 0 <= x < width and 0 <= y < height})
        arr = np.array(idx, dtype=np.intp)
        arr.setflags(write=False)
        return arr

    return flat(free), flat(obstacles)


def integrate_depth(m: SemanticMap, scan: DepthScan) -> SemanticMap:
    free, obstacles = _scan_cells(scan, m.width, m.height, m.cell_size)
    flat = m.occ.reshape(-1)
    touched = np.union1d(free, obstacles)
    m.explored_count += int(np.count_nonzero(flat[touched] == UNKNOWN))
    # Latest wins per ray; within one scan an obstacle observation is applied
    # after the free sweep so a shared corner cell ends up as an obstacle.
    flat[free] = FREE
    flat[obstacles] = OBSTACLE
    return m


def integrate_semantics(m: SemanticMap, d: Detections) -> SemanticMap:
    for obj in d.objects:
        if not m.in_bounds(obj.cell):
            continue
        if m.state(obj.cell) == UNKNOWN:
            m.set_state(obj.cell, FREE)
        m.objects.setdefault(obj.cell, {})[obj.instance_id] = obj.category
    for room in d.rooms:
        x0, y0, x1, y1 = room.extent
        x0, y0 = max(x0, 0), max(y0, 0)
        x1, y1 = min(x1, m.width - 1), min(y1, m.height - 1)
        if x0 > x1 or y0 > y1:
            continue
        occ = m.occ[y0:y1 + 1, x0:x1 + 1]
        labels = m.room[y0:y1 + 1, x0:x1 + 1]
        mask = (occ != UNKNOWN) & (labels < 0)
        if mask.any():
            labels[mask] = m._room_index(room.category)
    return m


def explored_fraction(m: SemanticMap) -> float:
    return m.explored_count / (m.width * m.height)
