"""Deterministic 2D gridworld: environment, kinematics, sensing and path oracles."""

from __future__ import annotations

import enum
import hashlib
import json
import math
import threading
from collections import OrderedDict
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .errors import ContractViolation, WorldFormatError
from .raycast import Cell, direction, line_cells, traverse

CELL_SIZE = 0.25
ROTATION_STEP = 30
UNREACHABLE = None

_LAYOUTS: OrderedDict[str, dict] = OrderedDict()
_LAYOUTS_LOCK = threading.Lock()
_MAX_LAYOUTS = 64


def layout_cache(world: "GridWorld") -> dict:
    """Cache shared by every world with the same walls, rooms and cell size.

    Suites give each episode its own world file (same layout, different
    objects); geometry-only results are reused across them.
    """
    with _LAYOUTS_LOCK:
        cache = _LAYOUTS.get(world.layout_key)
        if cache is None:
            cache = _LAYOUTS[world.layout_key] = {}
            if len(_LAYOUTS) > _MAX_LAYOUTS:
                _LAYOUTS.popitem(last=False)
        else:
            _LAYOUTS.move_to_end(world.layout_key)
        return cache

# Order matters for tie-breaking: row-major successor order (up, left, right, down).
NEIGHBORS4 = ((0, -1), (-1, 0), (1, 0), (0, 1))


class Action(str, enum.Enum):
    MOVE_AHEAD = "MoveAhead"
    ROTATE_LEFT = "RotateLeft"
    ROTATE_RIGHT = "RotateRight"
    STOP = "Stop"


@dataclass(frozen=True)
class ObjectInstance:
    id: str
    category: str
    position: Cell
    attributes: tuple[str, ...] = ()
    hidden: bool = False
    container_hint: str | None = None

    def __post_init__(self):
        if self.hidden and not self.container_hint:
            raise ContractViolation(f"hidden object {self.id} needs a container_hint")


@dataclass(frozen=True)
class AgentPose:
    cell: Cell
    heading: int = 0

    def to_dict(self) -> dict:
        return {"x": self.cell[0], "y": self.cell[1], "heading": self.heading}

    @classmethod
    def from_dict(cls, d: dict) -> "AgentPose":
        return cls((int(d["x"]), int(d["y"])), int(d.get("heading", 0)))


@dataclass(frozen=True)
class Ray:
    angle_offset: float
    range: float
    hit: bool


@dataclass(frozen=True)
class DepthScan:
    pose: AgentPose
    rays: tuple[Ray, ...]
    max_range: float
    cell_size: float = CELL_SIZE


@dataclass(frozen=True, eq=False)
class GridWorld:
    """Immutable environment.

    ``walls`` and ``rooms`` are indexed ``[y, x]``; ``rooms`` holds an index
    into ``room_names`` (keys kept in ``room_ids``) or -1 for wall cells.
    """

    id: str
    walls: np.ndarray
    rooms: np.ndarray
    room_names: dict[str, str]
    room_ids: tuple[str, ...]
    objects: tuple[ObjectInstance, ...] = ()
    cell_size: float = CELL_SIZE
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.walls.ndim != 2 or self.walls.shape[0] < 1 or self.walls.shape[1] < 1:
            raise ContractViolation("world needs width >= 1 and height >= 1")
        if not self.cell_size > 0:
            raise ContractViolation("cell_size must be positive")
        self.walls.setflags(write=False)
        self.rooms.setflags(write=False)
        seen = set()
        for obj in self.objects:
            if obj.id in seen:
                raise ContractViolation(f"duplicate object id {obj.id}")
            seen.add(obj.id)
            if not self.is_free(obj.position):
                raise ContractViolation(f"object {obj.id} is not on a free cell")
        if np.any((self.rooms < 0) & ~self.walls):
            raise ContractViolation("every free cell needs a room label")
        h = hashlib.blake2b(digest_size=16)
        h.update(repr((self.walls.shape, self.cell_size, self.room_ids,
                       [self.room_names[r] for r in self.room_ids])).encode())
        h.update(self.walls.tobytes())
        h.update(self.rooms.tobytes())
        object.__setattr__(self, "layout_key", h.hexdigest())

    @property
    def width(self) -> int:
        return self.walls.shape[1]

    @property
    def height(self) -> int:
        return self.walls.shape[0]

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and not self.walls[cell[1], cell[0]]

    def room_at(self, cell: Cell) -> str | None:
        if not self.in_bounds(cell):
            return None
        idx = self.rooms[cell[1], cell[0]]
        return None if idx < 0 else self.room_names[self.room_ids[idx]]

    def object(self, instance_id: str) -> ObjectInstance:
        for obj in self.objects:
            if obj.id == instance_id:
                return obj
        raise KeyError(instance_id)

    def room_extent(self, room_index: int) -> tuple[int, int, int, int]:
        """Bounding rectangle ``(x0, y0, x1, y1)`` (inclusive) of a room."""
        cache = layout_cache(self)
        key = ("extent", room_index)
        if key not in cache:
            ys, xs = np.nonzero(self.rooms == room_index)
            cache[key] = (int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))
        return cache[key]

    def free_cells(self) -> list[Cell]:
        ys, xs = np.nonzero(~self.walls)
        return [(int(x), int(y)) for y, x in zip(ys, xs)]

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        occ = ["".join("#" if w else "." for w in row) for row in self.walls]
        rooms = ["".join("#" if r < 0 else self.room_ids[r] for r in row) for row in self.rooms]
        return {
            "id": self.id,
            "width": self.width,
            "height": self.height,
            "cell_size": self.cell_size,
            "occupancy": occ,
            "rooms": rooms,
            "room_names": {k: self.room_names[k] for k in self.room_ids},
            "objects": [
                {
                    "id": o.id,
                    "category": o.category,
                    "attributes": list(o.attributes),
                    "x": o.position[0],
                    "y": o.position[1],
                    "hidden": o.hidden,
                    "container_hint": o.container_hint,
                }
                for o in self.objects
            ],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GridWorld":
        return _parse_world(data)


def _parse_world(data: dict[str, Any]) -> GridWorld:
    for key in ("id", "width", "height", "occupancy", "rooms", "room_names"):
        if key not in data:
            raise WorldFormatError(f"missing key {key!r}")
    width, height = data["width"], data["height"]
    if not isinstance(width, int) or not isinstance(height, int) or width < 1 or height < 1:
        raise WorldFormatError("width and height must be positive integers")
    cell_size = float(data.get("cell_size", CELL_SIZE))
    if cell_size <= 0:
        raise WorldFormatError("cell_size must be positive")
    occ, room_rows = data["occupancy"], data["rooms"]
    if len(occ) != height:
        raise WorldFormatError(f"occupancy has {len(occ)} rows, expected {height}")
    if len(room_rows) != height:
        raise WorldFormatError(f"rooms has {len(room_rows)} rows, expected {height}")
    room_names = dict(data["room_names"])
    room_ids = tuple(room_names)
    index = {rid: i for i, rid in enumerate(room_ids)}
    walls = np.zeros((height, width), dtype=bool)
    rooms = np.full((height, width), -1, dtype=np.int16)
    for y, row in enumerate(occ):
        if len(row) != width:
            raise WorldFormatError(f"occupancy row has {len(row)} cells, expected {width}", line=y + 1)
        for x, ch in enumerate(row):
            if ch == "#":
                walls[y, x] = True
            elif ch != ".":
                raise WorldFormatError(f"unexpected occupancy character {ch!r}", line=y + 1, column=x + 1)
    for y, row in enumerate(room_rows):
        if len(row) != width:
            raise WorldFormatError(f"rooms row has {len(row)} cells, expected {width}", line=y + 1)
        for x, ch in enumerate(row):
            if walls[y, x]:
                continue
            if ch not in index:
                raise WorldFormatError(f"free cell has unknown room id {ch!r}", line=y + 1, column=x + 1)
            rooms[y, x] = index[ch]
    objects = []
    for i, o in enumerate(data.get("objects", [])):
        try:
            obj = ObjectInstance(
                id=str(o["id"]),
                category=str(o["category"]),
                position=(int(o["x"]), int(o["y"])),
                attributes=tuple(o.get("attributes", ())),
                hidden=bool(o.get("hidden", False)),
                container_hint=o.get("container_hint"),
            )
        except (KeyError, TypeError, ValueError, ContractViolation) as exc:
            raise WorldFormatError(f"object #{i}: {exc}") from exc
        x, y = obj.position
        if not (0 <= x < width and 0 <= y < height) or walls[y, x]:
            raise WorldFormatError(f"object {obj.id} is not on a free cell", line=y + 1, column=x + 1)
        objects.append(obj)
    try:
        return GridWorld(
            id=str(data["id"]),
            walls=walls,
            rooms=rooms,
            room_names=room_names,
            room_ids=room_ids,
            objects=tuple(objects),
            cell_size=cell_size,
        )
    except ContractViolation as exc:
        raise WorldFormatError(str(exc)) from exc


def load_world(path: str | Path) -> GridWorld:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise WorldFormatError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    return _parse_world(data)


def dump_world(world: GridWorld, path: str | Path) -> None:
    Path(path).write_text(json.dumps(world.to_dict(), indent=1) + "\n")


# -- kinematics ---------------------------------------------------------

def check_pose(world: GridWorld, pose: AgentPose) -> None:
    if not world.is_free(pose.cell):
        raise ContractViolation(f"pose cell {pose.cell} is not a free in-bounds cell")
    if pose.heading % ROTATION_STEP or not 0 <= pose.heading < 360:
        raise ContractViolation(f"heading {pose.heading} is not a multiple of {ROTATION_STEP} in [0, 360)")


def heading_vector(heading: int) -> Cell:
    """Grid step for MoveAhead: the 4-neighbour closest to the heading."""
    quadrant = round(heading / 90) % 4
    return ((1, 0), (0, 1), (-1, 0), (0, -1))[quadrant]


def step(world: GridWorld, pose: AgentPose, action: Action) -> tuple[AgentPose, bool]:
    check_pose(world, pose)
    if action is Action.STOP:
        raise ContractViolation("Stop is handled by the agent loop")
    if action is Action.ROTATE_LEFT:
        return AgentPose(pose.cell, (pose.heading - ROTATION_STEP) % 360), False
    if action is Action.ROTATE_RIGHT:
        return AgentPose(pose.cell, (pose.heading + ROTATION_STEP) % 360), False
    dx, dy = heading_vector(pose.heading)
    target = (pose.cell[0] + dx, pose.cell[1] + dy)
    if world.is_free(target):
        return AgentPose(target, pose.heading), False
    return pose, True


# -- sensing -------------------------------------------------------------

def ray_offsets(fov: float, n_rays: int) -> list[float]:
    """Bin-centred offsets: evenly spaced, symmetric, no duplicate at 360."""
    return [-fov / 2 + fov * (i + 0.5) / n_rays for i in range(n_rays)]


def _cast(world: GridWorld, ox: float, oy: float, angle: float, max_cells: float) -> tuple[float, bool]:
    dx, dy = direction(angle)
    for x, y, t in traverse(ox, oy, dx, dy, max_cells):
        if t >= max_cells:
            break
        if not world.is_free((x, y)):
            return t, True
    return max_cells, False


def sense_depth(world: GridWorld, pose: AgentPose, fov: float = 90.0, n_rays: int = 60,
                max_range: float = 5.0) -> DepthScan:
    check_pose(world, pose)
    if not 0 < fov <= 360 or n_rays < 1 or not max_range > 0:
        raise ContractViolation("need fov in (0, 360], n_rays >= 1, max_range > 0")
    cache = layout_cache(world)
    key = ("depth", pose, fov, n_rays, max_range)
    cached = cache.get(key)
    if cached is not None:
        return cached
    cs = world.cell_size
    ox, oy = pose.cell[0] + 0.5, pose.cell[1] + 0.5
    max_cells = max_range / cs
    rays = []
    for off in ray_offsets(fov, n_rays):
        t, hit = _cast(world, ox, oy, pose.heading + off, max_cells)
        rays.append(Ray(off, t * cs if hit else max_range, hit))
    scan = DepthScan(pose, tuple(rays), max_range, cs)
    cache[key] = scan
    return scan


def bearing(from_cell: Cell, to_cell: Cell) -> float:
    return math.degrees(math.atan2(to_cell[1] - from_cell[1], to_cell[0] - from_cell[0])) % 360


def angle_diff(a: float, b: float) -> float:
    """Signed difference ``a - b`` wrapped to (-180, 180]."""
    d = (a - b) % 360
    return d - 360 if d > 180 else d


def line_of_sight(world: GridWorld, a: Cell, b: Cell) -> bool:
    return all(world.is_free(c) for c in line_cells(a, b))


def visible_objects(world: GridWorld, pose: AgentPose, fov: float = 90.0,
                    max_range: float = 5.0) -> list[ObjectInstance]:
    check_pose(world, pose)
    key = ("visible", pose, fov, max_range)
    cached = world._cache.get(key)
    if cached is not None:
        return list(cached)
    out = []
    ax, ay = pose.cell
    for obj in world.objects:
        ox, oy = obj.position
        if obj.hidden and max(abs(ox - ax), abs(oy - ay)) > 1:
            continue
        dist = math.hypot(ox - ax, oy - ay) * world.cell_size
        if dist > max_range + 1e-9:
            continue
        if dist > 0 and abs(angle_diff(bearing(pose.cell, obj.position), pose.heading)) > fov / 2 + 1e-9:
            continue
        if not line_of_sight(world, pose.cell, obj.position):
            continue
        out.append(obj)
    world._cache[key] = tuple(out)
    return out


# -- path oracles ----------------------------------------------------------

def _bfs(world: GridWorld, sources: Iterable[Cell]) -> dict[Cell, int]:
    dist: dict[Cell, int] = {}
    queue: deque[Cell] = deque()
    for s in sources:
        if s not in dist:
            dist[s] = 0
            queue.append(s)
    while queue:
        c = queue.popleft()
        d = dist[c] + 1
        for dx, dy in NEIGHBORS4:
            n = (c[0] + dx, c[1] + dy)
            if n not in dist and world.is_free(n):
                dist[n] = d
                queue.append(n)
    return dist


def distance_field(world: GridWorld, source: Cell) -> dict[Cell, int]:
    """4-connected step counts from ``source`` to every reachable free cell (cached)."""
    cache = layout_cache(world)
    key = ("bfs", source)
    if key not in cache:
        cache[key] = _bfs(world, [source])
    return cache[key]


def shortest_path_length(world: GridWorld, start: Cell, goal: Cell) -> float | None:
    """Meters along the shortest 4-connected free path, or ``None`` if disconnected."""
    for c in (start, goal):
        if not world.is_free(c):
            raise ContractViolation(f"cell {c} is not free")
    steps = distance_field(world, goal).get(start)
    return None if steps is None else steps * world.cell_size


def success_viewpoints(world: GridWorld, obj: ObjectInstance, success_distance: float) -> list[Cell]:
    """Free cells from which ``obj`` counts as reached: close enough, in sight, hidden rule applied."""
    key = ("viewpoints", obj.id, success_distance)
    if key in world._cache:
        return world._cache[key]
    ox, oy = obj.position
    r = int(math.ceil(success_distance / world.cell_size))
    cells = []
    for y in range(oy - r, oy + r + 1):
        for x in range(ox - r, ox + r + 1):
            c = (x, y)
            if c == obj.position or not world.is_free(c):
                continue
            if math.hypot(x - ox, y - oy) * world.cell_size > success_distance + 1e-9:
                continue
            if obj.hidden and max(abs(x - ox), abs(y - oy)) > 1:
                continue
            if line_of_sight(world, c, obj.position):
                cells.append(c)
    world._cache[key] = cells
    return cells


def optimal_length(world: GridWorld, start: Cell, obj: ObjectInstance, success_distance: float) -> float | None:
    """Shortest path length from ``start`` to any success viewpoint of ``obj``."""
    key = ("optimal", start, obj.id, success_distance)
    if key not in world._cache:
        targets = success_viewpoints(world, obj, success_distance)
        steps = _bfs(world, targets).get(start) if targets else None
        world._cache[key] = None if steps is None else steps * world.cell_size
    return world._cache[key]
