"""Procedural multi-room suites with one world variant per episode.

Every world in a suite shares its layout and furniture with its siblings;
each episode adds its own goal (and, for the distractor splits, a
same-category decoy). Furniture is co-placed by room type so that the
context around a frontier says something about the goal.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..catalog import (ATTRIBUTE_SETS, COMMON_GOALS, GOALS, HIDING_PREPOSITION, ROOM_FURNITURE, SURFACES,
                       UNCOMMON_GOALS, article)
from ..episode import DEFAULT_SPLITS, Episode, Instruction, Split
from ..errors import ConfigError, GenerationError, SuiteError, WorldFormatError
from ..raycast import Cell
from ..world import (AgentPose, GridWorld, ObjectInstance, ROTATION_STEP, dump_world, line_of_sight,
                     load_world, optimal_length, visible_objects)

log = logging.getLogger(__name__)

SUITE_FORMAT = 1
TEMPLATE_NOTE = "instruction templates are hand-written analogues, not benchmark originals"

RELATION_RADIUS_M = 1.0  # a relation phrase names furniture at most this far from the goal
DECOY_CLEARANCE_M = 1.5  # decoys keep this far from anything the instruction mentions
MIN_START_DISTANCE_M = 3.0
MAX_ATTEMPTS = 60

_ROOM_TYPES = tuple(ROOM_FURNITURE)


@dataclass(frozen=True)
class SuiteParams:
    worlds: int = 5
    episodes_per_split: int = 10
    splits: tuple[Split, ...] = DEFAULT_SPLITS
    grid: tuple[int, int] = (3, 3)  # rooms per row, rooms per column
    room_size: tuple[int, int] = (8, 10)  # interior cells, inclusive range
    extra_door_prob: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "splits", tuple(Split(s) for s in self.splits))
        object.__setattr__(self, "grid", tuple(self.grid))
        object.__setattr__(self, "room_size", tuple(self.room_size))
        if self.worlds < 1 or self.episodes_per_split < 1 or not self.splits:
            raise ConfigError("worlds, episodes_per_split and splits must be positive")
        if self.grid[0] * self.grid[1] > len(_ROOM_TYPES) or min(self.grid) < 1:
            raise ConfigError(f"grid {self.grid} needs 1..{len(_ROOM_TYPES)} rooms")
        if not 5 <= self.room_size[0] <= self.room_size[1]:
            raise ConfigError("room_size must be an increasing range starting at 5 or more")

    def to_dict(self) -> dict:
        return {"worlds": self.worlds, "episodes_per_split": self.episodes_per_split,
                "splits": [s.value for s in self.splits], "grid": list(self.grid),
                "room_size": list(self.room_size), "extra_door_prob": self.extra_door_prob}

    @classmethod
    def from_dict(cls, d: dict) -> "SuiteParams":
        return cls(**d)


@dataclass
class Layout:
    """A furnished base world plus the bookkeeping placement needs."""

    world: GridWorld
    room_cells: dict[int, list[Cell]]  # room index -> interior cells (doors excluded)
    doors: set[Cell]
    counter: dict[str, int] = field(default_factory=dict)

    def room_of_type(self, room_type: str) -> int | None:
        for idx, rid in enumerate(self.world.room_ids):
            if self.world.room_names[rid] == room_type:
                return idx
        return None


def _slug(category: str) -> str:
    return category.replace(" ", "-")


def _next_id(counter: dict[str, int], category: str) -> str:
    counter[category] = counter.get(category, 0) + 1
    return f"{_slug(category)}-{counter[category]}"


# -- layout -------------------------------------------------------------------

def _spanning_doors(rng: random.Random, cols: int, rows: int, extra: float) -> list[tuple[Cell, Cell]]:
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append(((c, r), (c + 1, r)))
            if r + 1 < rows:
                edges.append(((c, r), (c, r + 1)))
    # Randomized depth-first tree, then a few loops so routes are not unique.
    seen = {(rng.randrange(cols), rng.randrange(rows))}
    stack = list(seen)
    tree = set()
    while stack:
        cur = stack[-1]
        options = [e for e in edges if cur in e and (e[0] if e[1] == cur else e[1]) not in seen]
        if not options:
            stack.pop()
            continue
        e = rng.choice(options)
        nxt = e[0] if e[1] == cur else e[1]
        tree.add(e)
        seen.add(nxt)
        stack.append(nxt)
    return [e for e in edges if e in tree or rng.random() < extra]


def _furnish(rng: random.Random, world_id: str, room_idx: int, room_type: str, cells: list[Cell],
             walls: np.ndarray, doors: set[Cell], counter: dict[str, int]) -> list[ObjectInstance]:
    def near_door(c: Cell) -> bool:
        return any(abs(c[0] - d[0]) <= 1 and abs(c[1] - d[1]) <= 1 for d in doors)

    def by_wall(c: Cell) -> bool:
        return any(walls[c[1] + dy, c[0] + dx] for dx, dy in ((0, -1), (-1, 0), (1, 0), (0, 1)))

    slots = [c for c in cells if by_wall(c) and not near_door(c)]
    placed: list[ObjectInstance] = []
    for category in ROOM_FURNITURE[room_type]:
        free = [c for c in slots if all(max(abs(c[0] - o.position[0]), abs(c[1] - o.position[1])) >= 2
                                        for o in placed)]
        if not free:
            raise GenerationError("layout", f"{world_id}: no wall slot left for {category} in the {room_type}")
        placed.append(ObjectInstance(_next_id(counter, category), category, rng.choice(free)))
    return placed


def generate_layout(rng: random.Random, world_id: str, params: SuiteParams = SuiteParams()) -> Layout:
    cols, rows = params.grid
    lo, hi = params.room_size
    widths = [rng.randint(lo, hi) for _ in range(cols)]
    heights = [rng.randint(lo, hi) for _ in range(rows)]
    x0 = [1 + sum(widths[:c]) + c for c in range(cols)]
    y0 = [1 + sum(heights[:r]) + r for r in range(rows)]
    W, H = sum(widths) + cols + 1, sum(heights) + rows + 1
    walls = np.ones((H, W), dtype=bool)
    rooms = np.full((H, W), -1, dtype=np.int16)
    types = rng.sample(_ROOM_TYPES, cols * rows)
    room_cells: dict[int, list[Cell]] = {}
    for r in range(rows):
        for c in range(cols):
            idx = r * cols + c
            walls[y0[r]:y0[r] + heights[r], x0[c]:x0[c] + widths[c]] = False
            rooms[y0[r]:y0[r] + heights[r], x0[c]:x0[c] + widths[c]] = idx
            room_cells[idx] = [(x, y) for y in range(y0[r], y0[r] + heights[r])
                               for x in range(x0[c], x0[c] + widths[c])]
    doors: set[Cell] = set()
    for (ca, ra), (cb, rb) in _spanning_doors(rng, cols, rows, params.extra_door_prob):
        owner = ra * cols + ca
        if rb == ra:  # east-west neighbours share a wall column
            x = x0[cb] - 1
            y = rng.randint(y0[ra] + 1, y0[ra] + heights[ra] - 3)
            cells = [(x, y), (x, y + 1)]
        else:
            y = y0[rb] - 1
            x = rng.randint(x0[ca] + 1, x0[ca] + widths[ca] - 3)
            cells = [(x, y), (x + 1, y)]
        for cx, cy in cells:
            walls[cy, cx] = False
            rooms[cy, cx] = owner
            doors.add((cx, cy))
    room_ids = tuple("abcdefghi"[:cols * rows])
    room_names = {rid: types[i] for i, rid in enumerate(room_ids)}
    counter: dict[str, int] = {}
    objects: list[ObjectInstance] = []
    for idx in range(cols * rows):
        objects += _furnish(rng, world_id, idx, types[idx], room_cells[idx], walls, doors, counter)
    world = GridWorld(world_id, walls, rooms, room_names, room_ids, tuple(objects))
    return Layout(world, room_cells, doors, counter)


# -- goal placement -------------------------------------------------------------

def _dist_m(a: Cell, b: Cell, cell_size: float) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1]) * cell_size


@dataclass
class _Draft:
    objects: list[ObjectInstance]
    goal: ObjectInstance
    instruction: Instruction
    mentioned: tuple[str, ...]  # furniture categories the instruction relies on
    counter: dict[str, int]


def _open_cells(layout: Layout, objects: Sequence[ObjectInstance], room_idx: int) -> list[Cell]:
    taken = {o.position for o in objects}
    return [c for c in layout.room_cells[room_idx] if c not in taken and c not in layout.doors]


def _beside(layout: Layout, objects: Sequence[ObjectInstance], anchor: ObjectInstance, room_idx: int) -> list[Cell]:
    open_ = set(_open_cells(layout, objects, room_idx))
    ax, ay = anchor.position
    return [c for c in ((ax, ay - 1), (ax - 1, ay), (ax + 1, ay), (ax, ay + 1)) if c in open_]


def _anchors(layout: Layout, room_idx: int, categories: Iterable[str]) -> list[ObjectInstance]:
    wanted = set(categories)
    room = layout.world.rooms
    return [o for o in layout.world.objects
            if o.category in wanted and room[o.position[1], o.position[0]] == room_idx]


def _home(layout: Layout, category: str, hiding: bool) -> tuple[int, list[ObjectInstance]] | None:
    """The highest-affinity room present, with the anchors a goal there can sit beside."""
    for room_type, anchor_cats in GOALS[category]:
        idx = layout.room_of_type(room_type)
        if idx is None:
            continue
        cats = anchor_cats if not hiding else [c for c in ROOM_FURNITURE[room_type] if c in HIDING_PREPOSITION]
        found = _anchors(layout, idx, cats)
        if found:
            return idx, found
    return None


def _cap(text: str) -> str:
    return text[0].upper() + text[1:]


def _draft_goal(rng: random.Random, layout: Layout, split: Split) -> _Draft | None:
    hidden = split in (Split.HIDDEN, Split.HIDDEN_DISTRACT)
    pool = UNCOMMON_GOALS if split is Split.UNCOMMON else COMMON_GOALS
    category = rng.choice(pool)
    home = _home(layout, category, hidden)
    if home is None:
        return None
    room_idx, anchors = home
    anchor = rng.choice(anchors)
    cells = _beside(layout, layout.world.objects, anchor, room_idx)
    if not cells:
        return None
    cell = rng.choice(cells)
    counter = dict(layout.counter)
    cs = layout.world.cell_size
    attributes: tuple[str, ...] = ()
    relations: tuple[str, ...] = ()
    hint = None
    mentioned: tuple[str, ...] = ()
    if split in (Split.APPEARANCE, Split.APPEARANCE_DISTRACT):
        attributes = rng.choice(ATTRIBUTE_SETS[category])
        text = _cap(", ".join(attributes) + " " + category)
    elif split in (Split.SPACE, Split.SPACE_DISTRACT):
        prep = "on" if anchor.category in SURFACES else "near"
        relations = (f"{prep} {article(anchor.category)} {anchor.category}",)
        room = layout.world.rooms
        others = sorted((o for o in layout.world.objects
                         if o.category != anchor.category and _dist_m(o.position, cell, cs) <= RELATION_RADIUS_M
                         and room[o.position[1], o.position[0]] == room_idx
                         and line_of_sight(layout.world, o.position, cell)),
                        key=lambda o: (_dist_m(o.position, cell, cs), o.id))
        if others:
            relations += (f"near {article(others[0].category)} {others[0].category}",)
        mentioned = tuple(r.split(" ", 2)[2] for r in relations)
        text = _cap(category + " " + " ".join(relations))
    elif hidden:
        hint = f"{HIDING_PREPOSITION[anchor.category]} the {anchor.category}"
        relations = (hint,)
        mentioned = (anchor.category,)
        text = _cap(f"{category} {hint}")
    else:
        text = _cap(category)
    goal = ObjectInstance(_next_id(counter, category), category, cell, attributes, hidden, hint)
    return _Draft([*layout.world.objects, goal], goal, Instruction(text, category, attributes, relations),
                  mentioned, counter)


def _add_decoy(rng: random.Random, layout: Layout, draft: _Draft) -> bool:
    """Same-category, undescribed copy of the goal, clear of every mentioned furniture piece.

    The goal's own room is preferred so description, not room context,
    has to tell the two apart.
    """
    world, cs = layout.world, layout.world.cell_size
    goal_room = int(world.rooms[draft.goal.position[1], draft.goal.position[0]])
    mentioned = [o.position for o in world.objects if o.category in draft.mentioned]
    rooms = [goal_room] + rng.sample([r for r in layout.room_cells if r != goal_room], len(layout.room_cells) - 1)
    for room_idx in rooms:
        cells = [c for c in _open_cells(layout, draft.objects, room_idx)
                 if _dist_m(c, draft.goal.position, cs) > DECOY_CLEARANCE_M
                 and all(_dist_m(c, m, cs) > DECOY_CLEARANCE_M for m in mentioned)]
        if cells:
            decoy = ObjectInstance(_next_id(draft.counter, draft.goal.category), draft.goal.category,
                                   rng.choice(cells))
            draft.objects.append(decoy)
            return True
    return False


def _pick_start(rng: random.Random, world: GridWorld, goal: ObjectInstance, avoid_room: int,
                success_distance: float) -> AgentPose | None:
    cells = [c for c in world.free_cells() if int(world.rooms[c[1], c[0]]) != avoid_room]
    rng.shuffle(cells)
    for cell in cells[:40]:
        lo = optimal_length(world, cell, goal, success_distance)
        if lo is None or lo < MIN_START_DISTANCE_M:
            continue
        pose = AgentPose(cell, rng.randrange(360 // ROTATION_STEP) * ROTATION_STEP)
        if any(o.category == goal.category for o in visible_objects(world, pose)):
            continue
        return pose
    return None


def generate_episode(layout: Layout, split: Split, episode_id: str, rng: random.Random,
                     success_distance: float = 1.0) -> tuple[GridWorld, Episode]:
    base = layout.world
    for _ in range(MAX_ATTEMPTS):
        draft = _draft_goal(rng, layout, split)
        if draft is None:
            continue
        if split in (Split.APPEARANCE_DISTRACT, Split.SPACE_DISTRACT, Split.HIDDEN_DISTRACT):
            if not _add_decoy(rng, layout, draft):
                continue
        world = GridWorld(episode_id, base.walls, base.rooms, base.room_names, base.room_ids,
                          tuple(draft.objects), base.cell_size)
        goal_room = int(base.rooms[draft.goal.position[1], draft.goal.position[0]])
        start = _pick_start(rng, world, draft.goal, goal_room, success_distance)
        if start is None:
            continue
        episode = Episode(episode_id, world.id, start, draft.instruction, draft.goal.id, split,
                          seed=rng.randrange(2**31))
        return world, episode
    raise GenerationError(split.value, f"could not place a {split.value} goal in {base.id} "
                                       f"after {MAX_ATTEMPTS} attempts")


def generate_suite(master_seed: int, params: SuiteParams | dict | None = None) -> list[tuple[GridWorld, Episode]]:
    """Deterministic in ``master_seed``: the same seed gives the same suite."""
    if params is None:
        params = SuiteParams()
    elif isinstance(params, dict):
        params = SuiteParams.from_dict(params)
    out = []
    for wi in range(params.worlds):
        base_id = f"w{wi:02d}"
        layout = generate_layout(random.Random(f"{master_seed}:layout:{wi}"), base_id, params)
        for split in params.splits:
            for j in range(params.episodes_per_split):
                eid = f"{base_id}-{split.value.lower()}-{j:02d}"
                rng = random.Random(f"{master_seed}:{wi}:{split.value}:{j}")
                out.append(generate_episode(layout, split, eid, rng))
    log.info("generated %d episodes over %d layouts", len(out), params.worlds)
    return out


# -- audits -------------------------------------------------------------------

def audit_episode(world: GridWorld, episode: Episode) -> list[str]:
    """Ground-truth checks on instruction content; returns problems (empty means clean)."""
    problems = []
    try:
        goal = world.object(episode.goal_instance_id)
    except KeyError:
        return [f"{episode.id}: goal {episode.goal_instance_id} missing"]
    ins = episode.instruction
    if goal.category != ins.goal_category:
        problems.append(f"{episode.id}: goal category mismatch")
    missing = set(ins.attribute_terms) - set(goal.attributes)
    if missing:
        problems.append(f"{episode.id}: attributes {sorted(missing)} not on the goal")
    for term in ins.relation_terms:
        anchor = term.split(" ", 2)[2]
        limit = RELATION_RADIUS_M
        if not any(o.category == anchor and o.id != goal.id
                   and _dist_m(o.position, goal.position, world.cell_size) <= limit + 1e-9 for o in world.objects):
            problems.append(f"{episode.id}: no {anchor} within {limit} m of the goal")
    split = episode.split
    if split in (Split.SPACE, Split.SPACE_DISTRACT) and not ins.relation_terms:
        problems.append(f"{episode.id}: Space split without a relation phrase")
    if split in (Split.APPEARANCE, Split.APPEARANCE_DISTRACT) and not ins.attribute_terms:
        problems.append(f"{episode.id}: Appearance split without attributes")
    if split in (Split.HIDDEN, Split.HIDDEN_DISTRACT) and not goal.hidden:
        problems.append(f"{episode.id}: Hidden split with a visible goal")
    if split is Split.UNCOMMON and goal.category in COMMON_GOALS:
        problems.append(f"{episode.id}: Uncommon split with a common goal")
    if split.value.endswith("Distract"):
        decoys = [o for o in world.objects if o.category == goal.category and o.id != goal.id]
        if not decoys:
            problems.append(f"{episode.id}: distractor split without a distractor")
    return problems


# -- files --------------------------------------------------------------------

def write_suite(out_dir: str | Path, suite: Sequence[tuple[GridWorld, Episode]], master_seed: int,
                params: SuiteParams) -> Path:
    out = Path(out_dir)
    (out / "worlds").mkdir(parents=True, exist_ok=True)
    header = {"format": SUITE_FORMAT, "master_seed": master_seed, "params": params.to_dict(),
              "episodes": len(suite), "note": TEMPLATE_NOTE}
    (out / "suite.json").write_text(json.dumps(header, indent=1, sort_keys=True) + "\n")
    for world, _ in suite:
        dump_world(world, out / "worlds" / f"{world.id}.json")
    episodes = [ep.to_dict() for _, ep in suite]
    (out / "episodes.json").write_text(json.dumps(episodes, indent=1, sort_keys=True) + "\n")
    return out


def load_suite(suite_dir: str | Path) -> list[tuple[GridWorld, Episode]]:
    root = Path(suite_dir)
    try:
        records = json.loads((root / "episodes.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SuiteError(f"cannot read episodes from {root}: {exc}") from exc
    if not isinstance(records, list):
        raise SuiteError("episodes.json must hold a list")
    worlds: dict[str, GridWorld] = {}
    out = []
    for rec in records:
        ep = Episode.from_dict(rec)
        if ep.world_ref not in worlds:
            path = root / "worlds" / f"{ep.world_ref}.json"
            try:
                worlds[ep.world_ref] = load_world(path)
            except OSError as exc:
                raise SuiteError(f"episode {ep.id}: cannot read world {ep.world_ref}: {exc}") from exc
            except WorldFormatError as exc:
                raise SuiteError(f"{path.name}: {exc}") from exc
        world = worlds[ep.world_ref]
        try:
            world.object(ep.goal_instance_id)
        except KeyError:
            raise SuiteError(f"episode {ep.id}: goal {ep.goal_instance_id} not in world {world.id}") from None
        if not world.is_free(ep.start.cell):
            raise SuiteError(f"episode {ep.id}: start {ep.start.cell} is not free")
        out.append((world, ep))
    if not out:
        raise SuiteError(f"suite {root} has no episodes")
    return out
