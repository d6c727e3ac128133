"""Simulated open-vocabulary detector and scene-to-text rendering."""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .raycast import Cell, direction, traverse
from .world import (AgentPose, GridWorld, angle_diff, bearing, check_pose, layout_cache, ray_offsets,
                    visible_objects)


@dataclass(frozen=True)
class DetectedObject:
    category: str
    attributes: tuple[str, ...]
    cell: Cell
    instance_id: str


@dataclass(frozen=True)
class DetectedRoom:
    category: str
    extent: tuple[int, int, int, int]  # x0, y0, x1, y1 inclusive


@dataclass(frozen=True)
class Detections:
    objects: tuple[DetectedObject, ...]
    rooms: tuple[DetectedRoom, ...]
    timestamp: int
    pose: AgentPose | None = None

    @property
    def current_room(self) -> str | None:
        return self.rooms[0].category if self.rooms else None


@dataclass(frozen=True)
class NoiseModel:
    miss_prob: float = 0.0
    false_pos_prob: float = 0.0
    confusion: dict[str, str] = field(default_factory=dict)
    confusion_prob: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("miss_prob", "false_pos_prob", "confusion_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")

    def rng(self, step: int, key: str) -> random.Random:
        # Seeded per (episode seed, step, key): order-independent and process-stable.
        digest = hashlib.blake2b(f"{self.seed}:{step}:{key}".encode(), digest_size=8).digest()
        return random.Random(int.from_bytes(digest, "big"))


@dataclass(frozen=True)
class PromptVocab:
    object_prompts: tuple[str, ...]
    room_prompts: tuple[str, ...]

    def __post_init__(self):
        if not self.object_prompts or not self.room_prompts:
            raise ConfigError("vocab needs at least one object prompt and one room prompt")
        for name in ("object_prompts", "room_prompts"):
            items = getattr(self, name)
            if len(set(items)) != len(items):
                raise ConfigError(f"duplicate entries in {name}")

    @classmethod
    def from_dict(cls, data: dict) -> "PromptVocab":
        try:
            return cls(tuple(data["objects"]), tuple(data["rooms"]))
        except KeyError as exc:
            raise ConfigError(f"vocab file missing key {exc}") from exc


def load_vocab(path: str | Path | None = None) -> PromptVocab:
    if path is None:
        text = resources.files("langnav.data").joinpath("vocab.json").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read vocab file: {exc}") from exc
    return PromptVocab.from_dict(json.loads(text))


def _seen_cells(world: GridWorld, pose: AgentPose, fov: float, n_rays: int, max_range: float) -> list[Cell]:
    """Free cells swept by the depth rays, in first-seen order."""
    cache = layout_cache(world)
    key = ("seen", pose, fov, n_rays, max_range)
    if key in cache:
        return cache[key]
    max_cells = max_range / world.cell_size
    ox, oy = pose.cell[0] + 0.5, pose.cell[1] + 0.5
    order: dict[Cell, None] = {}
    for off in ray_offsets(fov, n_rays):
        dx, dy = direction(pose.heading + off)
        for x, y, t in traverse(ox, oy, dx, dy, max_cells):
            if t >= max_cells or not world.is_free((x, y)):
                break
            order.setdefault((x, y), None)
    cells = list(order)
    cache[key] = cells
    return cells


def detect(world: GridWorld, pose: AgentPose, vocab: PromptVocab, noise: NoiseModel, step: int,
           fov: float = 90.0, max_range: float = 5.0, n_rays: int = 60) -> Detections:
    check_pose(world, pose)
    prompts = set(vocab.object_prompts)
    objects = []
    for obj in visible_objects(world, pose, fov, max_range):
        if obj.category not in prompts:
            continue
        rng = noise.rng(step, obj.id)
        if rng.random() < noise.miss_prob:
            continue
        category = obj.category
        sub = noise.confusion.get(category)
        if sub is not None and rng.random() < noise.confusion_prob:
            if sub not in prompts:
                continue
            category = sub
        objects.append(DetectedObject(category, obj.attributes, obj.position, obj.id))

    seen = _seen_cells(world, pose, fov, n_rays, max_range)
    if noise.false_pos_prob > 0 and seen:
        rng = noise.rng(step, "false-positive")
        if rng.random() < noise.false_pos_prob:
            cell = seen[rng.randrange(len(seen))]
            category = vocab.object_prompts[rng.randrange(len(vocab.object_prompts))]
            objects.append(DetectedObject(category, (), cell, f"fp-{step}-{cell[0]}-{cell[1]}"))

    room_prompts = set(vocab.room_prompts)
    rooms = []
    here = int(world.rooms[pose.cell[1], pose.cell[0]])
    if here >= 0:
        rooms.append(DetectedRoom(world.room_at(pose.cell), world.room_extent(here)))
    others = sorted({int(world.rooms[y, x]) for x, y in seen} - {here, -1})
    for idx in others:
        name = world.room_names[world.room_ids[idx]]
        if name in room_prompts:
            rooms.append(DetectedRoom(name, world.room_extent(idx)))
    return Detections(tuple(objects), tuple(rooms), step, pose)


def relative_direction(pose: AgentPose, cell: Cell) -> str:
    if cell == pose.cell:
        return "here"
    rel = angle_diff(bearing(pose.cell, cell), pose.heading)
    if abs(rel) <= 45:
        return "ahead"
    if abs(rel) > 135:
        return "behind"
    # +y points down the grid, so a positive offset is clockwise: to the right.
    return "right" if rel > 0 else "left"


def describe_scene(d: Detections) -> str:
    room = d.current_room
    tail = f"you are in the {room}." if room else "you are in an unknown area."
    if not d.objects:
        return f"You see nothing notable; {tail}"
    parts = []
    for obj in d.objects:
        words = [*obj.attributes, obj.category]
        if d.pose is not None:
            words.append(relative_direction(d.pose, obj.cell))
        parts.append(" ".join(words))
    return "You see: " + "; ".join(parts) + "; " + tail


def distance_m(a: Cell, b: Cell, cell_size: float) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1]) * cell_size
